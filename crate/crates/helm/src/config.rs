//! Configuration documents: a TOML file, optionally layered over a named
//! hull preset, deserialized strictly and validated field by field.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use helm_core::control::ControlConfig;
use helm_core::dynamics::{BodyParams, EnvironmentField, Plant, ThrusterModel};
use helm_core::hydrostatics::{CoefficientOverrides, DragModel, FluidProperties, HullGeometry, HydroError};
use helm_core::perception::PerceptionConfig;
use helm_core::world::{LidarSimConfig, Obstacle, SonarSimConfig, World};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::BatteryConfig;
use crate::mission::{generate_survey_pattern, MissionItem, MissionPlan};

/// Built-in hull presets, by name.
pub const PRESETS: [(&str, &str); 2] = [
    ("bep-echoboat-160", include_str!("../presets/bep-echoboat-160.toml")),
    ("nac-kayak", include_str!("../presets/nac-kayak.toml")),
];

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error("{0}")]
    Schema(#[from] SchemaError),
}

/// A rejected value, located by its dotted path in the document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Propulsion {
    pub thrusters_per_side: u32,
}

impl Default for Propulsion {
    fn default() -> Self {
        Self { thrusters_per_side: 1 }
    }
}

/// Replacements for the hull-derived rigid-body defaults.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct BodyOverrides {
    pub yaw_inertia: Option<f64>,
    pub added_mass_surge: Option<f64>,
    pub added_mass_sway: Option<f64>,
    pub added_mass_yaw: Option<f64>,
    /// Linear surge damping used for top-speed calibration, N per m/s.
    pub surge_linear: Option<f64>,
    pub sway_linear: Option<f64>,
    pub sway_quadratic: Option<f64>,
    pub yaw_linear: Option<f64>,
    pub yaw_quadratic: Option<f64>,
}

impl BodyOverrides {
    pub fn apply(&self, mut b: BodyParams) -> BodyParams {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut b.yaw_inertia, self.yaw_inertia);
        set(&mut b.added_mass_surge, self.added_mass_surge);
        set(&mut b.added_mass_sway, self.added_mass_sway);
        set(&mut b.added_mass_yaw, self.added_mass_yaw);
        set(&mut b.surge_linear, self.surge_linear);
        set(&mut b.sway_linear, self.sway_linear);
        set(&mut b.sway_quadratic, self.sway_quadratic);
        set(&mut b.yaw_linear, self.yaw_linear);
        set(&mut b.yaw_quadratic, self.yaw_quadratic);
        b
    }
}

/// Inputs of the propulsion sizing report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Sizing {
    /// m/s
    pub design_speed: f64,
    pub moving_efficiency: f64,
    pub safety_factor: f64,
    /// Static thrust of one candidate unit, N. Defaults to the thruster model.
    pub unit_static_thrust: Option<f64>,
    /// Drag curve range, m/s.
    pub curve_min: f64,
    pub curve_max: f64,
    pub curve_steps: usize,
}

impl Default for Sizing {
    fn default() -> Self {
        Self {
            design_speed: 3.6,
            moving_efficiency: 0.5,
            safety_factor: 1.25,
            unit_static_thrust: None,
            curve_min: 0.5,
            curve_max: 4.0,
            curve_steps: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Sensors {
    pub lidar: LidarSimConfig,
    pub sonar: SonarSimConfig,
}

/// Fixed-step schedule, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct Rates {
    pub physics_hz: u32,
    pub control_hz: u32,
    pub telemetry_hz: u32,
}

impl Default for Rates {
    fn default() -> Self {
        Self {
            physics_hz: 50,
            control_hz: 10,
            telemetry_hz: 5,
        }
    }
}

impl Rates {
    pub fn physics_per_control(&self) -> u32 {
        self.physics_hz / self.control_hz
    }

    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz as f64
    }

    pub fn physics_dt(&self) -> f64 {
        1.0 / self.physics_hz as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub bind: String,
    pub tcp_port: u16,
    pub ws_port: u16,
    pub heartbeat_hz: u32,
    pub state_hz: u32,
    pub obstacle_hz: u32,
    /// Simulated seconds per wall-clock second; `inf` runs unpaced.
    pub timescale: f64,
    /// Whether the simulated GNSS reports a fix (gates arming).
    pub position_fix: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            tcp_port: 14650,
            ws_port: 14651,
            heartbeat_hz: 1,
            state_hz: 5,
            obstacle_hz: 5,
            timescale: 1.0,
            position_fix: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct StartPose {
    pub x: f64,
    pub y: f64,
    /// compass deg
    pub heading: f64,
}

/// Boustrophedon survey over a rectangle, expanded into waypoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SurveyConfig {
    pub corner_a: [f64; 2],
    pub corner_b: [f64; 2],
    pub lane_spacing: f64,
    pub transit_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct MissionConfig {
    pub start: StartPose,
    /// Launch point for return to launch; defaults to the start position.
    pub home: Option<[f64; 2]>,
    /// s
    pub timeout: f64,
    /// Leading part of each steady segment excluded from metrics, s.
    pub settle_window: f64,
    pub arm: bool,
    pub position_fix: bool,
    /// Simulated command-link loss from this time on, s.
    pub link_loss_after: Option<f64>,
    /// Survey waypoints, flown before `items`.
    pub survey: Option<SurveyConfig>,
    pub items: Vec<MissionItem>,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            start: StartPose::default(),
            home: None,
            timeout: 600.0,
            settle_window: 20.0,
            arm: true,
            position_fix: true,
            link_loss_after: None,
            survey: None,
            items: Vec::new(),
        }
    }
}

/// The document as written, after preset merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Hull preset layered underneath this document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub hull: HullGeometry,
    /// Require `hull.mass = displaced_volume * density`.
    #[serde(default)]
    pub buoyancy_consistent: bool,
    #[serde(default)]
    pub fluid: FluidProperties,
    #[serde(default)]
    pub drag: CoefficientOverrides,
    #[serde(default)]
    pub thruster: ThrusterModel,
    #[serde(default)]
    pub propulsion: Propulsion,
    #[serde(default)]
    pub body: BodyOverrides,
    #[serde(default)]
    pub sizing: Sizing,
    #[serde(default)]
    pub battery: BatteryConfig,
    #[serde(default)]
    pub environment: EnvironmentField,
    #[serde(default)]
    pub control: ControlConfig,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub sensors: Sensors,
    #[serde(default)]
    pub world: World,
    #[serde(default)]
    pub rates: Rates,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(default)]
    pub mission: MissionConfig,
}

/// Where a configuration value came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    Preset(String),
    User,
}

/// Origin of every leaf value present in the merged document, keyed by
/// dotted path. Absent paths took their built-in default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance(pub BTreeMap<String, Source>);

impl Provenance {
    pub fn source(&self, path: &str) -> Source {
        self.0.get(path).cloned().unwrap_or(Source::Default)
    }
}

/// A loaded, validated configuration.
#[derive(Debug, Clone)]
pub struct Config {
    pub file: ConfigFile,
    pub plant: Plant,
    pub provenance: Provenance,
}

impl Config {
    pub fn seed(&self) -> u64 {
        self.file.seed
    }

    pub fn drag_model(&self) -> DragModel {
        self.plant.drag
    }

    pub fn home(&self) -> [f64; 2] {
        let m = &self.file.mission;
        m.home.unwrap_or([m.start.x, m.start.y])
    }

    /// Mission plan from the `[mission]` section.
    pub fn plan(&self) -> Result<MissionPlan, SchemaError> {
        let m = &self.file.mission;
        let mut items = Vec::new();
        if let Some(s) = &m.survey {
            let survey = generate_survey_pattern(s.corner_a, s.corner_b, s.lane_spacing, s.transit_speed)
                .map_err(|e| SchemaError::new("mission.survey", e))?;
            items.extend(survey.items);
        }
        items.extend(m.items.iter().cloned());
        let plan = MissionPlan {
            items,
            home: self.home(),
            battery: self.file.battery,
            settle_window: m.settle_window,
        };
        plan.validate().map_err(|(path, msg)| SchemaError::new(path, msg))?;
        Ok(plan)
    }

    /// JSON Schema of the document format.
    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ConfigFile)).expect("schema serializes")
    }
}

pub fn load_file(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        origin: path.display().to_string(),
        source,
    })?;
    load_str(&text)
}

pub fn load_str(text: &str) -> Result<Config, ConfigError> {
    let user: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let mut provenance = Provenance::default();
    let merged = match user.get("preset") {
        Some(toml::Value::String(name)) => {
            let src = preset_source(name).ok_or_else(|| ConfigError::UnknownPreset(name.clone()))?;
            let mut base: toml::Table = src
                .parse()
                .map_err(|e: toml::de::Error| ConfigError::Parse(format!("preset {name}: {e}")))?;
            record(&base, "", &Source::Preset(name.clone()), &mut provenance);
            merge(&mut base, &user, "", &mut provenance);
            base
        }
        Some(_) => return Err(SchemaError::new("preset", "expected a preset name").into()),
        None => {
            record(&user, "", &Source::User, &mut provenance);
            user
        }
    };
    let file: ConfigFile = serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(if path == "." { String::new() } else { path }, e.into_inner())
    })?;
    from_file(file, provenance)
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn record(table: &toml::Table, prefix: &str, source: &Source, out: &mut Provenance) {
    for (k, v) in table {
        let path = join(prefix, k);
        match v {
            toml::Value::Table(t) => record(t, &path, source, out),
            _ => {
                out.0.insert(path, source.clone());
            }
        }
    }
}

/// Layers `user` over `base`: tables merge key by key, everything else
/// (including arrays) is replaced wholesale.
pub fn merge(base: &mut toml::Table, user: &toml::Table, prefix: &str, prov: &mut Provenance) {
    for (k, v) in user {
        let path = join(prefix, k);
        match (base.get_mut(k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u, &path, prov),
            _ => {
                let stale: Vec<String> = prov
                    .0
                    .range(path.clone()..)
                    .take_while(|(p, _)| p.starts_with(&path))
                    .filter(|(p, _)| *p == &path || p[path.len()..].starts_with('.'))
                    .map(|(p, _)| p.clone())
                    .collect();
                for p in stale {
                    prov.0.remove(&p);
                }
                match v {
                    toml::Value::Table(t) => record(t, &path, &Source::User, prov),
                    _ => {
                        prov.0.insert(path, Source::User);
                    }
                }
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn hydro(section: &str, e: HydroError) -> SchemaError {
    let field = match &e {
        HydroError::InvalidGeometry { field, .. } | HydroError::InvalidFluid { field, .. } => *field,
        HydroError::Domain { what, .. } | HydroError::Range { what, .. } => *what,
    };
    SchemaError::new(join(section, field), e)
}

fn check(ok: bool, path: &str, message: &str) -> Result<(), SchemaError> {
    if ok {
        Ok(())
    } else {
        Err(SchemaError::new(path, message))
    }
}

/// Validates a merged document and derives the plant.
pub fn from_file(file: ConfigFile, provenance: Provenance) -> Result<Config, ConfigError> {
    file.hull.validate().map_err(|e| hydro("hull", e))?;
    file.fluid.validate().map_err(|e| hydro("fluid", e))?;
    file.drag.validate().map_err(|e| hydro("drag", e))?;
    if file.buoyancy_consistent && !file.hull.is_buoyancy_consistent(&file.fluid, 1e-3) {
        let expected = file.hull.displaced_volume * file.fluid.density;
        return Err(SchemaError::new(
            "hull.mass",
            format!("buoyancy-consistent hull must weigh displaced_volume x density = {expected} kg"),
        )
        .into());
    }
    let dyn_err = |section: &str, e: helm_core::dynamics::DynamicsError| match e {
        helm_core::dynamics::DynamicsError::Parameter { field, .. } => SchemaError::new(join(section, field), e),
        other => SchemaError::new(section, other),
    };
    file.thruster.validate().map_err(|e| dyn_err("thruster", e))?;
    check(
        file.propulsion.thrusters_per_side >= 1,
        "propulsion.thrusters_per_side",
        "must be at least 1",
    )?;
    let h = &file.hull;
    let body = file.body.apply(BodyParams::for_hull(h.mass, h.length, h.beam));
    body.validate().map_err(|e| dyn_err("body", e))?;
    file.environment.validate().map_err(|e| dyn_err("environment", e))?;
    file.control
        .validate()
        .map_err(|e| match e {
            helm_core::control::ControlError::Parameter { field, value } => {
                SchemaError::new(join("control", field), format_args!("invalid value {value}"))
            }
            other => SchemaError::new("control", other),
        })?;
    file.battery.validate().map_err(|(f, m)| SchemaError::new(join("battery", f), m))?;
    validate_sizing(&file.sizing)?;
    validate_perception(&file.perception, &file.sensors)?;
    validate_world(&file.world)?;
    validate_rates(&file.rates, &file.service)?;
    validate_mission(&file.mission)?;
    let plant = Plant {
        body,
        thruster: file.thruster,
        thrusters_per_side: file.propulsion.thrusters_per_side,
        drag: DragModel {
            geometry: file.hull,
            fluid: file.fluid,
            overrides: file.drag,
        },
    };
    let config = Config {
        file,
        plant,
        provenance,
    };
    let m = &config.file.mission;
    if !m.items.is_empty() || m.survey.is_some() {
        config.plan()?;
    }
    Ok(config)
}

fn finite_positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

fn validate_sizing(s: &Sizing) -> Result<(), SchemaError> {
    check(finite_positive(s.design_speed), "sizing.design_speed", "must be positive")?;
    check(
        s.moving_efficiency > 0.0 && s.moving_efficiency <= 1.0,
        "sizing.moving_efficiency",
        "must lie in (0, 1]",
    )?;
    check(s.safety_factor >= 1.0, "sizing.safety_factor", "must be at least 1")?;
    if let Some(u) = s.unit_static_thrust {
        check(finite_positive(u), "sizing.unit_static_thrust", "must be positive")?;
    }
    check(s.curve_min >= 0.0, "sizing.curve_min", "must be non-negative")?;
    check(s.curve_max > s.curve_min, "sizing.curve_max", "must exceed curve_min")?;
    check(s.curve_steps >= 2, "sizing.curve_steps", "must be at least 2")
}

fn validate_perception(p: &PerceptionConfig, s: &Sensors) -> Result<(), SchemaError> {
    check(finite_positive(p.delta), "perception.delta", "must be positive")?;
    check(p.sonar_window >= 1, "perception.sonar_window", "must be at least 1")?;
    check(
        p.limits.min_cm < p.limits.max_cm && p.limits.max_cm < u16::MAX,
        "perception.limits.max_cm",
        "must exceed min_cm and stay below the no-reading sentinel",
    )?;
    check(p.shallow_threshold >= 0.0, "perception.shallow_threshold", "must be non-negative")?;
    check(s.lidar.samples_per_sweep >= 1, "sensors.lidar.samples_per_sweep", "must be at least 1")?;
    check(finite_positive(s.lidar.max_range), "sensors.lidar.max_range", "must be positive")?;
    check(s.lidar.noise >= 0.0, "sensors.lidar.noise", "must be non-negative")?;
    check(
        (0.0..=90.0).contains(&s.sonar.mount_angle),
        "sensors.sonar.mount_angle",
        "must lie in [0, 90] deg",
    )?;
    check(finite_positive(s.sonar.max_range), "sensors.sonar.max_range", "must be positive")?;
    check(s.sonar.noise >= 0.0, "sensors.sonar.noise", "must be non-negative")
}

fn validate_world(w: &World) -> Result<(), SchemaError> {
    for (i, o) in w.obstacles.iter().enumerate() {
        let path = format!("world.obstacles[{i}]");
        match *o {
            Obstacle::Circle { x, y, radius } => {
                check(x.is_finite() && y.is_finite(), &path, "centre must be finite")?;
                check(finite_positive(radius), &format!("{path}.radius"), "must be positive")?;
            }
            Obstacle::Segment { x1, y1, x2, y2 } => {
                check(
                    [x1, y1, x2, y2].iter().all(|v| v.is_finite()),
                    &path,
                    "end points must be finite",
                )?;
                check((x1, y1) != (x2, y2), &path, "segment has zero length")?;
            }
        }
    }
    for (i, z) in w.turbulence.iter().enumerate() {
        check(
            finite_positive(z.radius),
            &format!("world.turbulence[{i}].radius"),
            "must be positive",
        )?;
    }
    if let Some(d) = w.depth {
        check(finite_positive(d), "world.depth", "must be positive")?;
    }
    Ok(())
}

fn validate_rates(r: &Rates, s: &ServiceConfig) -> Result<(), SchemaError> {
    check(r.control_hz >= 1, "rates.control_hz", "must be at least 1")?;
    check(
        r.physics_hz >= r.control_hz && r.physics_hz.is_multiple_of(r.control_hz),
        "rates.physics_hz",
        "must be a multiple of control_hz",
    )?;
    check(r.physics_hz >= 10, "rates.physics_hz", "step must not exceed 0.1 s")?;
    for (path, hz) in [
        ("rates.telemetry_hz", r.telemetry_hz),
        ("service.heartbeat_hz", s.heartbeat_hz),
        ("service.state_hz", s.state_hz),
        ("service.obstacle_hz", s.obstacle_hz),
    ] {
        check(
            hz >= 1 && hz <= r.control_hz && r.control_hz.is_multiple_of(hz),
            path,
            "must divide control_hz",
        )?;
    }
    check(s.timescale > 0.0, "service.timescale", "must be positive")
}

fn validate_mission(m: &MissionConfig) -> Result<(), SchemaError> {
    check(finite_positive(m.timeout), "mission.timeout", "must be positive")?;
    check(
        m.settle_window >= 0.0 && m.settle_window.is_finite(),
        "mission.settle_window",
        "must be non-negative",
    )?;
    check(
        (0.0..360.0).contains(&m.start.heading),
        "mission.start.heading",
        "must lie in [0, 360)",
    )?;
    if let Some(t) = m.link_loss_after {
        check(t >= 0.0, "mission.link_loss_after", "must be non-negative")?;
    }
    Ok(())
}
