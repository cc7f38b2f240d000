//! The simulated vessel: plant, sensors, perception, autopilot and battery
//! advanced on a fixed schedule.
//!
//! A control tick is split in three so that callers can inject commands
//! against the fresh measurement: [`Sim::begin_tick`] samples the sensors,
//! [`Sim::apply`] hands commands to the autopilot and [`Sim::end_tick`]
//! runs the controller and integrates the physics up to the next tick.

use helm_core::control::{ActuatorMap, Autopilot, Command, ControlError, ControlOutput, Controller, Health, TransitionCause};
use helm_core::dynamics::{sensor_sample, step, ActuatorState, EnvironmentField, Measurement, Plant, PwmPair, VesselState};
use helm_core::perception::{PerceptionPipeline, SectorArray};
use helm_core::world::{simulate_lidar, simulate_sonar, World};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::battery::Battery;
use crate::config::{Config, Rates, Sensors};
use crate::log::{Event, Thrust, TickRecord};

pub struct Sim {
    plant: Plant,
    env: EnvironmentField,
    world: World,
    sensors: Sensors,
    rates: Rates,
    controller: Controller,
    perception: PerceptionPipeline,
    battery: Battery,
    state: VesselState,
    actuators: ActuatorState,
    nav_rng: ChaCha8Rng,
    lidar_rng: ChaCha8Rng,
    tick: u64,
    physics_steps: u64,
    position_fix: bool,
    meas: Measurement,
    sectors: SectorArray,
    commands: Vec<Command>,
    events: Vec<Event>,
    last: Option<ControlOutput>,
}

impl Sim {
    pub fn new(config: &Config, seed: u64) -> Self {
        let f = &config.file;
        let start = f.mission.start;
        let home = config.home();
        let actuators = ActuatorMap {
            thruster: config.plant.thruster,
            thrusters_per_side: config.plant.thrusters_per_side,
        };
        let controller =
            Controller::new(f.control, actuators, (home[0], home[1])).expect("control config was validated");
        let nav_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut lidar_rng = ChaCha8Rng::seed_from_u64(seed);
        lidar_rng.set_stream(1);
        let state = VesselState::at_rest(start.x, start.y, start.heading);
        Self {
            plant: config.plant,
            env: f.environment,
            world: f.world.clone(),
            sensors: f.sensors,
            rates: f.rates,
            controller,
            perception: PerceptionPipeline::new(&f.perception),
            battery: Battery::new(f.battery),
            state,
            actuators: ActuatorState::default(),
            nav_rng,
            lidar_rng,
            tick: 0,
            physics_steps: 0,
            position_fix: true,
            meas: Measurement::default(),
            sectors: SectorArray::empty(0),
            commands: Vec::new(),
            events: Vec::new(),
            last: None,
        }
    }

    pub fn set_position_fix(&mut self, fix: bool) {
        self.position_fix = fix;
    }

    pub fn position_fix(&self) -> bool {
        self.position_fix
    }

    pub fn tick_count(&self) -> u64 {
        self.tick
    }

    pub fn physics_steps(&self) -> u64 {
        self.physics_steps
    }

    /// Time of the current tick, s.
    pub fn time(&self) -> f64 {
        self.tick as f64 / self.rates.control_hz as f64
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn state(&self) -> &VesselState {
        &self.state
    }

    pub fn measurement(&self) -> &Measurement {
        &self.meas
    }

    pub fn sectors(&self) -> &SectorArray {
        &self.sectors
    }

    pub fn controller(&self) -> &Controller {
        &self.controller
    }

    pub fn controller_mut(&mut self) -> &mut Controller {
        &mut self.controller
    }

    pub fn battery(&self) -> &Battery {
        &self.battery
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    /// Output of the most recent completed tick.
    pub fn last_output(&self) -> Option<&ControlOutput> {
        self.last.as_ref()
    }

    pub fn shallow_water(&self) -> bool {
        self.perception.shallow_water
    }

    pub fn push_event(&mut self, e: Event) {
        self.events.push(e);
    }

    /// Samples the navigation sensors and refreshes the obstacle ring.
    pub fn begin_tick(&mut self) {
        self.meas = sensor_sample(&self.state, &self.env.noise, &mut self.nav_rng);
        let sweep = simulate_lidar(&self.world, &self.state, &self.sensors.lidar, &mut self.lidar_rng);
        let ping = self
            .sensors
            .sonar
            .enabled
            .then(|| simulate_sonar(&self.world, &self.state, &self.sensors.sonar, &mut self.lidar_rng));
        let t_ms = (self.tick * 1000 / self.rates.control_hz as u64) as u32;
        self.sectors = self.perception.process(&sweep, ping.as_ref(), t_ms);
    }

    /// Hands a command to the autopilot. Arming honours the position fix.
    pub fn apply(&mut self, command: Command) -> Result<(), ControlError> {
        self.commands.push(command);
        let result = match command {
            Command::Arm { armed: true } => self.controller.arm_with_fix(self.position_fix, &self.meas),
            c => self.controller.apply(c, &self.meas),
        };
        if let Err(e) = &result {
            self.events.push(Event::CommandRejected {
                command,
                reason: e.to_string(),
            });
        }
        result
    }

    /// Runs the controller on this tick's inputs and integrates the plant
    /// up to the next tick.
    pub fn end_tick(&mut self, link_age: f64, item: Option<usize>) -> TickRecord {
        let health = Health {
            link_age,
            battery: self.battery.fraction(),
            position_fix: self.position_fix,
        };
        let dt = self.rates.control_dt();
        let out = self.controller.tick(&self.meas, &self.sectors, &health, dt);
        let mut events = std::mem::take(&mut self.events);
        for tr in &out.transitions {
            events.push(Event::ModeChange {
                from: tr.from,
                to: tr.to,
                cause: tr.cause,
            });
            if matches!(tr.cause, TransitionCause::LinkLoss | TransitionCause::LowBattery) {
                events.push(Event::Failsafe {
                    mode: tr.to,
                    cause: tr.cause,
                });
            }
        }
        if let Some((x, y)) = out.arrived {
            events.push(Event::Arrival {
                x,
                y,
                distance: (x - self.meas.x).hypot(y - self.meas.y),
                truth_distance: (x - self.state.x).hypot(y - self.state.y),
            });
        }
        let telemetry_every = (self.rates.control_hz / self.rates.telemetry_hz.max(1)).max(1) as u64;
        let record = TickRecord {
            tick: self.tick,
            t: self.time(),
            truth: self.state,
            measured: self.meas,
            mode: out.mode,
            armed: out.armed,
            setpoint: out.setpoint,
            item,
            speed_sp: out.speed_sp,
            heading_sp: out.heading_sp,
            speed_scale: out.speed_scale,
            rate_ff: out.rate_ff,
            thrust: Thrust {
                forward: out.t_forward,
                yaw: out.t_yaw,
                left: out.t_left,
                right: out.t_right,
            },
            pwm: out.pwm,
            actuators: self.actuators,
            sectors_digest: self.sectors.digest(),
            bow_distance: self.sectors.nearest_ahead(self.controller.config.proximity.cone_half_width),
            clearance: self.world.clearance(self.state.x, self.state.y),
            speed_terms: out.speed_terms,
            heading_terms: out.heading_terms,
            battery: self.battery.fraction(),
            energy_ah: self.battery.used_ah(),
            link_age,
            telemetry: self.tick.is_multiple_of(telemetry_every),
            commands: std::mem::take(&mut self.commands),
            events,
        };
        self.integrate(out.pwm);
        self.last = Some(out);
        self.tick += 1;
        record
    }

    fn integrate(&mut self, pwm: PwmPair) {
        let dt = self.rates.physics_dt();
        let hz = self.rates.physics_hz as f64;
        for _ in 0..self.rates.physics_per_control() {
            let next = step(&self.state, &mut self.actuators, pwm, &self.env, &self.plant, dt)
                .expect("controller pulse widths stay inside the ESC range");
            self.physics_steps += 1;
            self.state = VesselState {
                t: self.physics_steps as f64 / hz,
                ..next
            };
            let current = self.battery.config.current(self.actuators.left, self.actuators.right);
            self.battery.drain(current, dt);
        }
    }
}
