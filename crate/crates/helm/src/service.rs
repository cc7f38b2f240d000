//! The live vessel behind a helm-link endpoint.
//!
//! [`ServiceCore`] owns the simulation and is transport-agnostic: frames go
//! in through [`ServiceCore::enqueue`], each [`ServiceCore::tick`] applies
//! them in arrival order and returns the frames to send. [`serve`] wraps it
//! with a TCP listener and a WebSocket endpoint, one thread per client and
//! a single simulation thread.

use std::collections::{HashMap, VecDeque};
use std::io::{self, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use helm_core::control::{Autopilot, Command, ControlError, ControlMode, Setpoint, DEFAULT_ACCEPT_RADIUS};
use helm_core::dynamics::world_to_body;
use helm_core::protocol::{encode, health, AckResult, Frame, Heartbeat, Message, ObstacleMsg, ParseEvent, StateMsg, StreamParser};
use tungstenite::handshake::server::{ErrorResponse, Request, Response};

use crate::config::{Config, ServiceConfig};
use crate::log::TickRecord;
use crate::sim::Sim;

pub type ClientId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outbound {
    Broadcast(Vec<u8>),
    To(ClientId, Vec<u8>),
}

pub struct ServiceCore {
    sim: Sim,
    cfg: ServiceConfig,
    control_hz: u32,
    low_battery: f64,
    seq: u8,
    last_rx: Option<u64>,
    queue: VecDeque<(ClientId, Frame)>,
}

fn ack(acked_id: u8, result: AckResult) -> Message {
    Message::Ack {
        acked_id,
        result: result as u8,
    }
}

fn rejected(e: ControlError) -> AckResult {
    match e {
        ControlError::InvalidSetpoint { .. } | ControlError::Parameter { .. } => AckResult::Invalid,
        _ => AckResult::Rejected,
    }
}

impl ServiceCore {
    pub fn new(config: &Config, seed: u64) -> Self {
        let mut sim = Sim::new(config, seed);
        sim.set_position_fix(config.file.service.position_fix);
        Self {
            sim,
            cfg: config.file.service.clone(),
            control_hz: config.file.rates.control_hz,
            low_battery: config.file.control.failsafe.low_battery,
            seq: 0,
            last_rx: None,
            queue: VecDeque::new(),
        }
    }

    pub fn sim(&self) -> &Sim {
        &self.sim
    }

    pub fn sim_mut(&mut self) -> &mut Sim {
        &mut self.sim
    }

    /// Queues a frame for the next tick.
    pub fn enqueue(&mut self, client: ClientId, frame: Frame) {
        self.queue.push_back((client, frame));
    }

    /// Seconds since the last frame from any client; time since start when
    /// nothing has arrived yet.
    pub fn link_age(&self) -> f64 {
        let since = self.last_rx.unwrap_or(0);
        (self.sim.tick_count() - since) as f64 / self.control_hz as f64
    }

    fn next_seq(&mut self) -> u8 {
        let s = self.seq;
        self.seq = self.seq.wrapping_add(1);
        s
    }

    /// Translates and applies one command frame, returning the ACK result.
    fn handle(&mut self, message: &Message) -> Option<AckResult> {
        let mode = self.sim.controller().mode();
        let command = match *message {
            Message::Heartbeat(_) | Message::State(_) | Message::Obstacle(_) | Message::Ack { .. } => return None,
            Message::Unknown { .. } => return Some(AckResult::Invalid),
            Message::SetMode { mode } => match ControlMode::from_code(mode) {
                Some(mode) => Command::SetMode { mode },
                None => return Some(AckResult::Invalid),
            },
            Message::Arm { flag } => match flag {
                0 => Command::Arm { armed: false },
                1 => Command::Arm { armed: true },
                _ => return Some(AckResult::Invalid),
            },
            Message::SetThrust { left, right } => {
                if left.unsigned_abs() > 1000 || right.unsigned_abs() > 1000 {
                    return Some(AckResult::Invalid);
                }
                if mode != ControlMode::Manual {
                    return Some(AckResult::Rejected);
                }
                Command::SetSetpoint {
                    setpoint: Setpoint::Manual {
                        left: left as f64 / 1000.0,
                        right: right as f64 / 1000.0,
                    },
                }
            }
            Message::SetVelHead { speed_mms, heading_cdeg } => {
                if heading_cdeg >= 36000 {
                    return Some(AckResult::Invalid);
                }
                if mode != ControlMode::GuidedVelocityHeading {
                    return Some(AckResult::Rejected);
                }
                Command::SetSetpoint {
                    setpoint: Setpoint::VelHead {
                        speed: speed_mms as f64 / 1000.0,
                        heading: heading_cdeg as f64 / 100.0,
                    },
                }
            }
            Message::SetWaypoint {
                x_mm,
                y_mm,
                accept_radius_cm,
            } => {
                if !matches!(mode, ControlMode::GuidedPosition | ControlMode::Loiter) {
                    return Some(AckResult::Rejected);
                }
                let accept_radius = if accept_radius_cm == 0 {
                    DEFAULT_ACCEPT_RADIUS
                } else {
                    accept_radius_cm as f64 / 100.0
                };
                Command::Engage {
                    mode: ControlMode::GuidedPosition,
                    setpoint: Setpoint::Waypoint {
                        x: x_mm as f64 / 1000.0,
                        y: y_mm as f64 / 1000.0,
                        accept_radius,
                    },
                }
            }
        };
        Some(match self.sim.apply(command) {
            Ok(()) => AckResult::Ok,
            Err(e) => rejected(e),
        })
    }

    fn every(&self, hz: u32) -> bool {
        let n = (self.control_hz / hz.max(1)).max(1) as u64;
        self.sim.tick_count().is_multiple_of(n)
    }

    fn health_bits(&self) -> u8 {
        let mut h = 0;
        if !self.sim.position_fix() {
            h |= health::NO_POSITION_FIX;
        }
        if self.link_age() > self.sim.controller().config.failsafe.link_timeout {
            h |= health::LINK_LOST;
        }
        if self.sim.battery().fraction() <= self.low_battery {
            h |= health::LOW_BATTERY;
        }
        if self.sim.shallow_water() {
            h |= health::SHALLOW_WATER;
        }
        h
    }

    fn telemetry(&mut self, out: &mut Vec<Outbound>) {
        let mut frames = Vec::new();
        if self.every(self.cfg.heartbeat_hz) {
            let c = self.sim.controller();
            frames.push(Message::Heartbeat(Heartbeat {
                mode: c.mode().code(),
                armed: c.armed() as u8,
                health: self.health_bits(),
            }));
        }
        if self.every(self.cfg.state_hz) {
            let m = *self.sim.measurement();
            let (ve, vn) = (m.speed * m.course.to_radians().sin(), m.speed * m.course.to_radians().cos());
            let (u, v) = world_to_body(m.psi, ve, vn);
            let max = self.sim.plant().max_thrust_per_side();
            let (l, r) = self
                .sim
                .last_output()
                .map(|o| (o.t_left / max, o.t_right / max))
                .unwrap_or((0.0, 0.0));
            if let Ok(s) = StateMsg::from_physical(self.sim.time(), m.x, m.y, m.psi, u, v, m.yaw_rate, l, r) {
                frames.push(Message::State(s));
            }
        }
        if self.every(self.cfg.obstacle_hz) {
            let s = self.sim.sectors();
            frames.push(Message::Obstacle(ObstacleMsg {
                t_ms: s.t_ms,
                distances: s.distances,
            }));
        }
        for f in frames {
            let seq = self.next_seq();
            out.push(Outbound::Broadcast(encode(&f, seq).expect("telemetry fits a frame")));
        }
    }

    /// One control tick: apply queued frames, step the vessel, emit ACKs
    /// and due telemetry.
    pub fn tick(&mut self) -> (Vec<Outbound>, TickRecord) {
        let mut out = Vec::new();
        self.sim.begin_tick();
        while let Some((client, frame)) = self.queue.pop_front() {
            self.last_rx = Some(self.sim.tick_count());
            if let Some(result) = self.handle(&frame.message) {
                let bytes = encode(&ack(frame.message.id(), result), frame.seq).expect("ack fits a frame");
                out.push(Outbound::To(client, bytes));
            }
        }
        // telemetry describes the state the commands were applied against
        self.telemetry(&mut out);
        let record = self.sim.end_tick(self.link_age(), None);
        (out, record)
    }
}

enum Inbound {
    Connected(ClientId, Sender<Vec<u8>>),
    Frame(ClientId, Frame),
    Gone(ClientId),
}

/// A running service; dropping it does not stop the threads, call
/// [`ServiceHandle::stop`].
pub struct ServiceHandle {
    pub tcp_addr: SocketAddr,
    pub ws_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn stop(self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads {
            let _ = t.join();
        }
    }

    /// Blocks until the simulation thread exits.
    pub fn wait(self) {
        for t in self.threads {
            let _ = t.join();
        }
    }
}

const POLL: Duration = Duration::from_millis(10);

/// Binds both endpoints and starts the simulation loop.
///
/// `timescale` is simulated seconds per wall-clock second; infinity runs
/// unpaced. Ports of 0 pick free ones.
pub fn serve(config: &Config, seed: u64, timescale: f64) -> io::Result<ServiceHandle> {
    let svc = &config.file.service;
    let tcp = TcpListener::bind((svc.bind.as_str(), svc.tcp_port))?;
    let ws = TcpListener::bind((svc.bind.as_str(), svc.ws_port))?;
    tcp.set_nonblocking(true)?;
    ws.set_nonblocking(true)?;
    let tcp_addr = tcp.local_addr()?;
    let ws_addr = ws.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = mpsc::channel();
    let ids = Arc::new(std::sync::atomic::AtomicU64::new(1));
    let mut threads = Vec::new();
    {
        let (stop, tx, ids) = (stop.clone(), tx.clone(), ids.clone());
        threads.push(thread::spawn(move || accept_loop(tcp, stop, tx, ids, tcp_client)));
    }
    {
        let (stop, tx, ids) = (stop.clone(), tx.clone(), ids.clone());
        threads.push(thread::spawn(move || accept_loop(ws, stop, tx, ids, ws_client)));
    }
    drop(tx);
    let core = ServiceCore::new(config, seed);
    let dt = config.file.rates.control_dt();
    {
        let stop = stop.clone();
        threads.push(thread::spawn(move || sim_loop(core, rx, stop, dt, timescale)));
    }
    Ok(ServiceHandle {
        tcp_addr,
        ws_addr,
        stop,
        threads,
    })
}

type ClientFn = fn(TcpStream, ClientId, Sender<Inbound>, Receiver<Vec<u8>>, Arc<AtomicBool>);

fn accept_loop(listener: TcpListener, stop: Arc<AtomicBool>, tx: Sender<Inbound>, ids: Arc<std::sync::atomic::AtomicU64>, client: ClientFn) {
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                let id = ids.fetch_add(1, Ordering::SeqCst);
                let (otx, orx) = mpsc::channel();
                if tx.send(Inbound::Connected(id, otx)).is_err() {
                    return;
                }
                let (tx, stop) = (tx.clone(), stop.clone());
                thread::spawn(move || client(stream, id, tx, orx, stop));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(_) => thread::sleep(POLL),
        }
    }
}

fn forward(parser: &mut StreamParser, bytes: &[u8], id: ClientId, tx: &Sender<Inbound>) -> bool {
    for e in parser.feed(bytes) {
        if let ParseEvent::Frame(f) = e {
            if tx.send(Inbound::Frame(id, f)).is_err() {
                return false;
            }
        }
    }
    true
}

fn tcp_client(stream: TcpStream, id: ClientId, tx: Sender<Inbound>, out: Receiver<Vec<u8>>, stop: Arc<AtomicBool>) {
    let _ = stream.set_nodelay(true);
    let Ok(mut writer) = stream.try_clone() else {
        let _ = tx.send(Inbound::Gone(id));
        return;
    };
    let write_stop = stop.clone();
    let w = thread::spawn(move || {
        while !write_stop.load(Ordering::SeqCst) {
            match out.recv_timeout(POLL) {
                Ok(bytes) => {
                    if writer.write_all(&bytes).is_err() {
                        return;
                    }
                }
                Err(mpsc::RecvTimeoutError::Timeout) => {}
                Err(mpsc::RecvTimeoutError::Disconnected) => return,
            }
        }
    });
    let mut reader = stream;
    let _ = reader.set_read_timeout(Some(POLL));
    let mut parser = StreamParser::new();
    let mut buf = [0u8; 1024];
    while !stop.load(Ordering::SeqCst) {
        match reader.read(&mut buf) {
            Ok(0) => break,
            Ok(n) => {
                if !forward(&mut parser, &buf[..n], id, &tx) {
                    break;
                }
            }
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    let _ = reader.shutdown(std::net::Shutdown::Both);
    let _ = tx.send(Inbound::Gone(id));
    let _ = w.join();
}

#[allow(clippy::result_large_err)]
fn ws_client(stream: TcpStream, id: ClientId, tx: Sender<Inbound>, out: Receiver<Vec<u8>>, stop: Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let check_path = |req: &Request, resp: Response| -> Result<Response, ErrorResponse> {
        if req.uri().path() == "/link" {
            Ok(resp)
        } else {
            let mut e = ErrorResponse::new(Some("not found".into()));
            *e.status_mut() = tungstenite::http::StatusCode::NOT_FOUND;
            Err(e)
        }
    };
    let mut ws = match tungstenite::accept_hdr(stream, check_path) {
        Ok(ws) => ws,
        Err(_) => {
            let _ = tx.send(Inbound::Gone(id));
            return;
        }
    };
    let _ = ws.get_mut().set_read_timeout(Some(POLL));
    let mut parser = StreamParser::new();
    'run: while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(tungstenite::Message::Binary(b)) => {
                if !forward(&mut parser, &b, id, &tx) {
                    break;
                }
            }
            Ok(tungstenite::Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        loop {
            match out.try_recv() {
                Ok(bytes) => {
                    if ws.send(tungstenite::Message::binary(bytes)).is_err() {
                        break 'run;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => break 'run,
            }
        }
    }
    let _ = ws.close(None);
    let _ = tx.send(Inbound::Gone(id));
}

fn sim_loop(mut core: ServiceCore, rx: Receiver<Inbound>, stop: Arc<AtomicBool>, dt: f64, timescale: f64) {
    let mut clients: HashMap<ClientId, Sender<Vec<u8>>> = HashMap::new();
    let start = Instant::now();
    let paced = timescale.is_finite();
    while !stop.load(Ordering::SeqCst) {
        loop {
            match rx.try_recv() {
                Ok(Inbound::Connected(id, tx)) => {
                    clients.insert(id, tx);
                }
                Ok(Inbound::Frame(id, f)) => core.enqueue(id, f),
                Ok(Inbound::Gone(id)) => {
                    clients.remove(&id);
                }
                Err(_) => break,
            }
        }
        let (out, _) = core.tick();
        for o in out {
            match o {
                Outbound::Broadcast(bytes) => {
                    clients.retain(|_, tx| tx.send(bytes.clone()).is_ok());
                }
                Outbound::To(id, bytes) => {
                    if let Some(tx) = clients.get(&id) {
                        if tx.send(bytes).is_err() {
                            clients.remove(&id);
                        }
                    }
                }
            }
        }
        if paced {
            let due = start + Duration::from_secs_f64(core.sim().time() / timescale);
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        } else {
            let _ = dt;
            thread::yield_now();
        }
    }
}
