//! helm-link framing.
//!
//! ```text
//! 0xFA | len u8 | seq u8 | id u8 | payload[len] | crc16 LE
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over `len, seq, id, payload`. Payload
//! integers are little-endian. Unknown ids decode to [`Message::Unknown`]
//! so newer peers can add messages.

use alloc::vec::Vec;

use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::angle::wrap_360;
use crate::perception::SECTOR_COUNT;

pub const MAGIC: u8 = 0xFA;
pub const MAX_PAYLOAD: usize = 250;
/// Bytes of framing around the payload.
pub const OVERHEAD: usize = 6;
pub const PARSER_BUFFER: usize = 4096;

pub const ID_HEARTBEAT: u8 = 0x00;
pub const ID_STATE: u8 = 0x01;
pub const ID_OBSTACLE: u8 = 0x02;
pub const ID_SET_THRUST: u8 = 0x10;
pub const ID_SET_VEL_HEAD: u8 = 0x11;
pub const ID_SET_WAYPOINT: u8 = 0x12;
pub const ID_SET_MODE: u8 = 0x13;
pub const ID_ARM: u8 = 0x14;
pub const ID_ACK: u8 = 0x7F;

const CRC: crc::Crc<u16> = crc::Crc::<u16>::new(&crc::CRC_16_IBM_3740);

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, unreflected, no final xor.
pub fn crc16(bytes: &[u8]) -> u16 {
    CRC.checksum(bytes)
}

/// Fixed payload length of a known message id.
pub fn payload_len(id: u8) -> Option<usize> {
    Some(match id {
        ID_HEARTBEAT => 3,
        ID_STATE => 24,
        ID_OBSTACLE => 4 + 2 * SECTOR_COUNT,
        ID_SET_THRUST => 4,
        ID_SET_VEL_HEAD => 4,
        ID_SET_WAYPOINT => 10,
        ID_SET_MODE => 1,
        ID_ARM => 1,
        ID_ACK => 2,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Heartbeat {
    pub mode: u8,
    pub armed: u8,
    pub health: u8,
}

/// Health bits carried in [`Heartbeat::health`].
pub mod health {
    pub const NO_POSITION_FIX: u8 = 1 << 0;
    pub const LINK_LOST: u8 = 1 << 1;
    pub const LOW_BATTERY: u8 = 1 << 2;
    pub const SHALLOW_WATER: u8 = 1 << 3;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StateMsg {
    pub t_ms: u32,
    pub x_mm: i32,
    pub y_mm: i32,
    /// 0..=35999
    pub psi_cdeg: u16,
    pub u_mms: i16,
    pub v_mms: i16,
    pub r_cdps: i16,
    pub thr_l_permille: i16,
    pub thr_r_permille: i16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ObstacleMsg {
    pub t_ms: u32,
    #[cfg_attr(feature = "serde", serde(with = "crate::perception::sector_serde"))]
    pub distances: [u16; SECTOR_COUNT],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[repr(u8)]
pub enum AckResult {
    Ok = 0,
    Rejected = 1,
    Invalid = 2,
}

impl AckResult {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(AckResult::Ok),
            1 => Some(AckResult::Rejected),
            2 => Some(AckResult::Invalid),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Message {
    Heartbeat(Heartbeat),
    State(StateMsg),
    Obstacle(ObstacleMsg),
    SetThrust { left: i16, right: i16 },
    SetVelHead { speed_mms: u16, heading_cdeg: u16 },
    SetWaypoint { x_mm: i32, y_mm: i32, accept_radius_cm: u16 },
    SetMode { mode: u8 },
    Arm { flag: u8 },
    Ack { acked_id: u8, result: u8 },
    /// Message id this implementation does not know, kept verbatim.
    Unknown { id: u8, payload: Vec<u8> },
}

impl Message {
    pub fn id(&self) -> u8 {
        match self {
            Message::Heartbeat(_) => ID_HEARTBEAT,
            Message::State(_) => ID_STATE,
            Message::Obstacle(_) => ID_OBSTACLE,
            Message::SetThrust { .. } => ID_SET_THRUST,
            Message::SetVelHead { .. } => ID_SET_VEL_HEAD,
            Message::SetWaypoint { .. } => ID_SET_WAYPOINT,
            Message::SetMode { .. } => ID_SET_MODE,
            Message::Arm { .. } => ID_ARM,
            Message::Ack { .. } => ID_ACK,
            Message::Unknown { id, .. } => *id,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Message::Heartbeat(_) => "HEARTBEAT",
            Message::State(_) => "STATE",
            Message::Obstacle(_) => "OBSTACLE",
            Message::SetThrust { .. } => "SET_THRUST",
            Message::SetVelHead { .. } => "SET_VEL_HEAD",
            Message::SetWaypoint { .. } => "SET_WAYPOINT",
            Message::SetMode { .. } => "SET_MODE",
            Message::Arm { .. } => "ARM",
            Message::Ack { .. } => "ACK",
            Message::Unknown { .. } => "UNKNOWN",
        }
    }

    fn write_payload(&self, out: &mut Vec<u8>) {
        match self {
            Message::Heartbeat(h) => out.extend_from_slice(&[h.mode, h.armed, h.health]),
            Message::State(s) => {
                out.extend_from_slice(&s.t_ms.to_le_bytes());
                out.extend_from_slice(&s.x_mm.to_le_bytes());
                out.extend_from_slice(&s.y_mm.to_le_bytes());
                out.extend_from_slice(&s.psi_cdeg.to_le_bytes());
                for v in [s.u_mms, s.v_mms, s.r_cdps, s.thr_l_permille, s.thr_r_permille] {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            Message::Obstacle(o) => {
                out.extend_from_slice(&o.t_ms.to_le_bytes());
                for d in &o.distances {
                    out.extend_from_slice(&d.to_le_bytes());
                }
            }
            Message::SetThrust { left, right } => {
                out.extend_from_slice(&left.to_le_bytes());
                out.extend_from_slice(&right.to_le_bytes());
            }
            Message::SetVelHead { speed_mms, heading_cdeg } => {
                out.extend_from_slice(&speed_mms.to_le_bytes());
                out.extend_from_slice(&heading_cdeg.to_le_bytes());
            }
            Message::SetWaypoint {
                x_mm,
                y_mm,
                accept_radius_cm,
            } => {
                out.extend_from_slice(&x_mm.to_le_bytes());
                out.extend_from_slice(&y_mm.to_le_bytes());
                out.extend_from_slice(&accept_radius_cm.to_le_bytes());
            }
            Message::SetMode { mode } => out.push(*mode),
            Message::Arm { flag } => out.push(*flag),
            Message::Ack { acked_id, result } => out.extend_from_slice(&[*acked_id, *result]),
            Message::Unknown { payload, .. } => out.extend_from_slice(payload),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EncodeError {
    #[error("payload of {0} bytes exceeds 250")]
    PayloadTooLong(usize),
    #[error("opaque message uses reserved id {0:#04x}")]
    ReservedId(u8),
    #[error("psi_cdeg {0} outside 0..36000")]
    Heading(u16),
    #[error("{field} = {value} is not representable")]
    Range { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame does not start with 0xFA")]
    BadMagic,
    #[error("frame length does not match its header")]
    BadLength,
    #[error("crc mismatch: frame {received:#06x}, computed {computed:#06x}")]
    BadCrc { received: u16, computed: u16 },
    #[error("STATE heading {0} outside 0..36000")]
    BadHeading(u16),
}

/// Frames `message` with sequence number `seq`.
pub fn encode(message: &Message, seq: u8) -> Result<Vec<u8>, EncodeError> {
    match message {
        Message::Unknown { id, payload } => {
            if payload_len(*id).is_some() {
                return Err(EncodeError::ReservedId(*id));
            }
            if payload.len() > MAX_PAYLOAD {
                return Err(EncodeError::PayloadTooLong(payload.len()));
            }
        }
        Message::State(s) if s.psi_cdeg >= 36000 => return Err(EncodeError::Heading(s.psi_cdeg)),
        _ => {}
    }
    let mut out = Vec::with_capacity(OVERHEAD + MAX_PAYLOAD);
    out.extend_from_slice(&[MAGIC, 0, seq, message.id()]);
    message.write_payload(&mut out);
    let len = out.len() - 4;
    out[1] = len as u8;
    let crc = crc16(&out[1..]);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Frame {
    pub seq: u8,
    pub message: Message,
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        head.try_into().unwrap_or([0; N])
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }
}

fn parse_payload(id: u8, payload: &[u8]) -> Result<Message, DecodeError> {
    match payload_len(id) {
        Some(n) if n != payload.len() => return Err(DecodeError::BadLength),
        None => {
            return Ok(Message::Unknown {
                id,
                payload: payload.to_vec(),
            })
        }
        _ => {}
    }
    let mut r = Reader(payload);
    Ok(match id {
        ID_HEARTBEAT => Message::Heartbeat(Heartbeat {
            mode: r.u8(),
            armed: r.u8(),
            health: r.u8(),
        }),
        ID_STATE => {
            let s = StateMsg {
                t_ms: r.u32(),
                x_mm: r.i32(),
                y_mm: r.i32(),
                psi_cdeg: r.u16(),
                u_mms: r.i16(),
                v_mms: r.i16(),
                r_cdps: r.i16(),
                thr_l_permille: r.i16(),
                thr_r_permille: r.i16(),
            };
            if s.psi_cdeg >= 36000 {
                return Err(DecodeError::BadHeading(s.psi_cdeg));
            }
            Message::State(s)
        }
        ID_OBSTACLE => {
            let t_ms = r.u32();
            let mut distances = [0u16; SECTOR_COUNT];
            for d in distances.iter_mut() {
                *d = r.u16();
            }
            Message::Obstacle(ObstacleMsg { t_ms, distances })
        }
        ID_SET_THRUST => Message::SetThrust {
            left: r.i16(),
            right: r.i16(),
        },
        ID_SET_VEL_HEAD => Message::SetVelHead {
            speed_mms: r.u16(),
            heading_cdeg: r.u16(),
        },
        ID_SET_WAYPOINT => Message::SetWaypoint {
            x_mm: r.i32(),
            y_mm: r.i32(),
            accept_radius_cm: r.u16(),
        },
        ID_SET_MODE => Message::SetMode { mode: r.u8() },
        ID_ARM => Message::Arm { flag: r.u8() },
        _ => Message::Ack {
            acked_id: r.u8(),
            result: r.u8(),
        },
    })
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode(bytes: &[u8]) -> Result<Frame, DecodeError> {
    if bytes.first() != Some(&MAGIC) {
        return Err(DecodeError::BadMagic);
    }
    if bytes.len() < OVERHEAD {
        return Err(DecodeError::BadLength);
    }
    let len = bytes[1] as usize;
    if len > MAX_PAYLOAD || bytes.len() != OVERHEAD + len {
        return Err(DecodeError::BadLength);
    }
    let body = &bytes[1..4 + len];
    let received = u16::from_le_bytes([bytes[4 + len], bytes[5 + len]]);
    let computed = crc16(body);
    if received != computed {
        return Err(DecodeError::BadCrc { received, computed });
    }
    let message = parse_payload(bytes[3], &bytes[4..4 + len])?;
    Ok(Frame { seq: bytes[2], message })
}

/// Round half away from zero into an integer range.
fn quantize(field: &'static str, value: f64, scale: f64, lo: f64, hi: f64) -> Result<i64, EncodeError> {
    let q = libm::round(value * scale);
    if !(q >= lo && q <= hi) {
        return Err(EncodeError::Range { field, value });
    }
    Ok(q as i64)
}

impl StateMsg {
    /// Quantizes a physical state: time s, position m, heading deg, body
    /// velocities m/s, yaw rate deg/s and per-side commands in `[-1, 1]`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_physical(
        t: f64,
        x: f64,
        y: f64,
        psi: f64,
        u: f64,
        v: f64,
        r: f64,
        thr_left: f64,
        thr_right: f64,
    ) -> Result<Self, EncodeError> {
        let i32r = (i32::MIN as f64, i32::MAX as f64);
        let i16r = (i16::MIN as f64, i16::MAX as f64);
        let psi_cdeg = quantize("psi", wrap_360(psi), 100.0, 0.0, 36000.0)? as u16;
        Ok(Self {
            t_ms: quantize("t", t, 1000.0, 0.0, u32::MAX as f64)? as u32,
            x_mm: quantize("x", x, 1000.0, i32r.0, i32r.1)? as i32,
            y_mm: quantize("y", y, 1000.0, i32r.0, i32r.1)? as i32,
            psi_cdeg: if psi_cdeg >= 36000 { 0 } else { psi_cdeg },
            u_mms: quantize("u", u, 1000.0, i16r.0, i16r.1)? as i16,
            v_mms: quantize("v", v, 1000.0, i16r.0, i16r.1)? as i16,
            r_cdps: quantize("r", r, 100.0, i16r.0, i16r.1)? as i16,
            thr_l_permille: quantize("thr_left", thr_left, 1000.0, -1000.0, 1000.0)? as i16,
            thr_r_permille: quantize("thr_right", thr_right, 1000.0, -1000.0, 1000.0)? as i16,
        })
    }

    pub fn x(&self) -> f64 {
        self.x_mm as f64 / 1000.0
    }

    pub fn y(&self) -> f64 {
        self.y_mm as f64 / 1000.0
    }

    pub fn psi(&self) -> f64 {
        self.psi_cdeg as f64 / 100.0
    }
}

impl Message {
    /// SET_WAYPOINT from meters.
    pub fn set_waypoint(x: f64, y: f64, accept_radius: f64) -> Result<Self, EncodeError> {
        Ok(Message::SetWaypoint {
            x_mm: quantize("x", x, 1000.0, i32::MIN as f64, i32::MAX as f64)? as i32,
            y_mm: quantize("y", y, 1000.0, i32::MIN as f64, i32::MAX as f64)? as i32,
            accept_radius_cm: quantize("accept_radius", accept_radius, 100.0, 0.0, u16::MAX as f64)? as u16,
        })
    }

    /// SET_VEL_HEAD from m/s and deg.
    pub fn set_vel_head(speed: f64, heading: f64) -> Result<Self, EncodeError> {
        let h = quantize("heading", wrap_360(heading), 100.0, 0.0, 36000.0)? as u16;
        Ok(Message::SetVelHead {
            speed_mms: quantize("speed", speed, 1000.0, 0.0, u16::MAX as f64)? as u16,
            heading_cdeg: if h >= 36000 { 0 } else { h },
        })
    }
}

/// What a [`StreamParser`] found in the byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseEvent {
    Frame(Frame),
    /// A frame-shaped region was rejected, or bytes were skipped.
    Error(DecodeError),
    /// Bytes before the next magic byte were discarded.
    Resync { skipped: usize },
    /// The buffer overflowed and its oldest bytes were dropped.
    Overflow { dropped: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ParserStats {
    pub frames: u64,
    pub bad_magic: u64,
    pub bad_length: u64,
    pub bad_crc: u64,
    pub skipped_bytes: u64,
    pub overflow_bytes: u64,
}

/// Incremental decoder for a byte stream carrying frames and noise.
///
/// After any error the parser drops a single byte and searches for the next
/// magic byte, so a valid frame directly following garbage is never lost.
/// The span of an accepted frame is rescanned as well: garbage can pass the
/// CRC by chance and swallow the header of a real frame, so a frame is
/// reported at every offset where a complete CRC-valid frame starts. Errors
/// inside an accepted span are not reported. A candidate header whose
/// declared length cannot be satisfied yet is skipped when a complete valid
/// frame is already buffered behind it.
#[derive(Debug, Clone, Default)]
pub struct StreamParser {
    buf: Vec<u8>,
    /// Length of the buffer prefix belonging to an accepted frame.
    covered: usize,
    stats: ParserStats,
}

enum Probe {
    Frame(usize),
    Incomplete,
    Invalid(DecodeError),
}

fn probe(buf: &[u8]) -> Probe {
    if buf.len() < 4 {
        return Probe::Incomplete;
    }
    let len = buf[1] as usize;
    if len > MAX_PAYLOAD {
        return Probe::Invalid(DecodeError::BadLength);
    }
    if let Some(n) = payload_len(buf[3]) {
        if n != len {
            return Probe::Invalid(DecodeError::BadLength);
        }
    }
    if buf.len() < OVERHEAD + len {
        return Probe::Incomplete;
    }
    let received = u16::from_le_bytes([buf[4 + len], buf[5 + len]]);
    let computed = crc16(&buf[1..4 + len]);
    if received != computed {
        return Probe::Invalid(DecodeError::BadCrc { received, computed });
    }
    Probe::Frame(OVERHEAD + len)
}

impl StreamParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stats(&self) -> ParserStats {
        self.stats
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Appends `chunk` and returns everything that can be decided so far.
    pub fn feed(&mut self, chunk: &[u8]) -> Vec<ParseEvent> {
        let mut events = Vec::new();
        self.buf.extend_from_slice(chunk);
        if self.buf.len() > PARSER_BUFFER {
            let dropped = self.buf.len() - PARSER_BUFFER;
            self.buf.drain(..dropped);
            self.covered = self.covered.saturating_sub(dropped);
            self.stats.overflow_bytes += dropped as u64;
            events.push(ParseEvent::Overflow { dropped });
        }
        let mut pos = 0;
        loop {
            let rest = &self.buf[pos..];
            let Some(start) = rest.iter().position(|b| *b == MAGIC) else {
                let n = self.buf.len() - pos.max(self.covered);
                self.skip(n, &mut events);
                pos = self.buf.len();
                break;
            };
            if start > 0 {
                let n = (pos + start).saturating_sub(pos.max(self.covered));
                self.skip(n, &mut events);
                pos += start;
                continue;
            }
            let inside = pos < self.covered;
            match probe(rest) {
                Probe::Frame(n) => {
                    match decode(&rest[..n]) {
                        Ok(frame) => {
                            self.stats.frames += 1;
                            events.push(ParseEvent::Frame(frame));
                            self.covered = self.covered.max(pos + n);
                        }
                        Err(e) if !inside => self.reject(e, &mut events),
                        Err(_) => {}
                    }
                    pos += 1;
                }
                Probe::Invalid(e) => {
                    if !inside {
                        self.reject(e, &mut events);
                    }
                    pos += 1;
                }
                Probe::Incomplete => {
                    let covered = self.covered;
                    let later = (1..rest.len()).find(|&i| rest[i] == MAGIC && matches!(probe(&rest[i..]), Probe::Frame(_)));
                    match later {
                        Some(i) => {
                            if !inside {
                                self.reject(DecodeError::BadLength, &mut events);
                            }
                            let n = (pos + i).saturating_sub((pos + 1).max(covered));
                            self.skip(n, &mut events);
                            pos += i;
                        }
                        None => break,
                    }
                }
            }
        }
        self.buf.drain(..pos);
        self.covered = self.covered.saturating_sub(pos);
        events
    }

    fn skip(&mut self, n: usize, events: &mut Vec<ParseEvent>) {
        if n == 0 {
            return;
        }
        self.stats.bad_magic += 1;
        self.stats.skipped_bytes += n as u64;
        events.push(ParseEvent::Resync { skipped: n });
    }

    fn reject(&mut self, e: DecodeError, events: &mut Vec<ParseEvent>) {
        match e {
            DecodeError::BadCrc { .. } => self.stats.bad_crc += 1,
            DecodeError::BadMagic => self.stats.bad_magic += 1,
            _ => self.stats.bad_length += 1,
        }
        self.stats.skipped_bytes += 1;
        events.push(ParseEvent::Error(e));
    }
}
