use helm_core::control::{heading_controller, l1_heading, mix, MixerLimits, Pid, PidGains};
use helm_core::dynamics::{step, ActuatorState, EnvironmentField, Measurement, PwmPair, VesselState};
use helm_core::perception::{
    downsample, fuse, proximity_policy, weighted_min_average, LidarSample, LidarSweep, RangeLimits, SectorArray,
    NO_READING, SECTOR_COUNT,
};
use helm_core::protocol::{decode, encode, Heartbeat, Message, ObstacleMsg, ParseEvent, StateMsg, StreamParser};
use helm_core::{wrap_360, wrap_error};
use proptest::prelude::*;

mod common;

proptest! {
    #[test]
    fn wrap_error_is_shortest(target in 0.0f64..360.0, current in 0.0f64..360.0) {
        let e = wrap_error(target, current);
        prop_assert!(e > -180.0 && e <= 180.0);
        let back = wrap_360(current + e);
        let diff = (back - target).abs();
        prop_assert!(diff < 1e-9 || (360.0 - diff) < 1e-9);
    }

    #[test]
    fn mixer_algebra_before_saturation(f in -80.0f64..80.0, y in -80.0f64..80.0) {
        let lim = MixerLimits { max_thrust_per_side: 161.0, steering_priority: true };
        let (l, r) = mix(f, y, &lim);
        prop_assert!((l + r - 2.0 * f).abs() < 1e-9);
        prop_assert!((r - l - 2.0 * y).abs() < 1e-9);
    }

    #[test]
    fn mixer_saturation_safety(f in -1000.0f64..1000.0, y in -1000.0f64..1000.0, max in 1.0f64..500.0, prio: bool) {
        let lim = MixerLimits { max_thrust_per_side: max, steering_priority: prio };
        let (l, r) = mix(f, y, &lim);
        prop_assert!(l.abs() <= max + 1e-9 && r.abs() <= max + 1e-9);
        if prio && y.abs() <= max && y != 0.0 {
            prop_assert_eq!((r - l).signum(), y.signum());
            prop_assert!((r - l - 2.0 * y).abs() < 1e-9);
        }
    }

    #[test]
    fn heading_sign(psi in 0.0f64..360.0, err in 0.01f64..179.0) {
        let c = helm_core::control::ControlConfig::default();
        let mut outer = Pid::new(c.heading_outer);
        let mut inner = Pid::new(c.heading_inner);
        let sp = wrap_360(psi + err);
        let t = heading_controller(sp, psi, 0.0, 0.0, 0.1, &mut outer, &mut inner);
        let (l, r) = mix(0.0, t.t_yaw, &MixerLimits { max_thrust_per_side: 161.0, steering_priority: true });
        prop_assert!(r >= l);
    }

    #[test]
    fn zero_gain_pid_is_silent(errors in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let mut pid = Pid::new(PidGains::new(0.0, 0.0, 0.0, 1.0, 1.0));
        for e in errors {
            prop_assert_eq!(pid.update(e, e * 0.5, 0.1).output, 0.0);
        }
    }

    #[test]
    fn l1_degenerates_continuously(speed in 0.0f64..0.2, course in 0.0f64..360.0, tx in -50.0f64..50.0, ty in -50.0f64..50.0) {
        prop_assume!(tx.hypot(ty) > 1.0);
        let m = Measurement { x: 0.0, y: 0.0, psi: course, speed, course, yaw_rate: 0.0 };
        let out = l1_heading(&m, tx, ty, 5.0);
        prop_assert!(out.heading.is_finite() && out.rate_ff.is_finite());
        prop_assert!(out.rate_ff.abs() <= (2.0 * speed / 5.0).to_degrees() + 1e-9);
    }

    #[test]
    fn weighting_bounds(bin in prop::collection::vec(0.0f64..40.0, 1..30), delta in 0.05f64..5.0) {
        let w = weighted_min_average(&bin, delta).unwrap();
        let min = bin.iter().cloned().fold(f64::INFINITY, f64::min);
        let mean = bin.iter().sum::<f64>() / bin.len() as f64;
        prop_assert!(w >= min - 1e-9 && w <= mean + 1e-9);
    }

    /// Lowering a sample that already sits within `delta` of the sector
    /// value never raises the sector value.
    #[test]
    fn downsampling_monotone_near_value(
        bin in prop::collection::vec(0.5f64..40.0, 1..20),
        idx in any::<prop::sample::Index>(),
        cut in 0.0f64..1.0,
    ) {
        let delta = 0.5;
        let before = sector_value(&bin, delta);
        let near: Vec<usize> = (0..bin.len()).filter(|&k| bin[k] <= before + delta).collect();
        let i = near[idx.index(near.len())];
        let mut lowered = bin.clone();
        lowered[i] *= cut;
        prop_assert!(sector_value(&lowered, delta) <= before + 1e-9);
    }

    /// A far outlier can pull the value up by at most (n - 1) delta / e.
    #[test]
    fn downsampling_increase_is_bounded(
        bin in prop::collection::vec(0.5f64..40.0, 1..20),
        idx in any::<prop::sample::Index>(),
        cut in 0.0f64..1.0,
    ) {
        let delta = 0.5;
        let before = sector_value(&bin, delta);
        let i = idx.index(bin.len());
        let mut lowered = bin.clone();
        lowered[i] *= cut;
        let bound = (bin.len() - 1) as f64 * delta / std::f64::consts::E;
        prop_assert!(sector_value(&lowered, delta) <= before + bound + 1e-9);
    }

    #[test]
    fn fusion_is_conservative(
        lidar in prop::collection::vec(prop::option::of(0.0f64..60.0), SECTOR_COUNT),
        sonar in prop::option::of(0.0f64..60.0),
    ) {
        let limits = RangeLimits::default();
        let out = fuse(&lidar, sonar, limits, 0);
        prop_assert_eq!(out.distances.len(), SECTOR_COUNT);
        for (i, d) in out.distances.iter().enumerate() {
            let mut src = lidar[i];
            if i == 0 {
                src = match (src, sonar) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            match src {
                None => prop_assert_eq!(*d, NO_READING),
                Some(m) => {
                    prop_assert!(*d >= limits.min_cm && *d <= limits.max_cm);
                    prop_assert!(*d as f64 <= m * 100.0 + 1.0);
                }
            }
        }
    }

    #[test]
    fn policy_monotone(a in 0.0f64..30.0, b in 0.0f64..30.0) {
        let scale = |d: f64| {
            let mut s = SectorArray::empty(0);
            s.distances[0] = (d * 100.0).round() as u16;
            proximity_policy(&s, 10.0, 4.0, 3, 0.3)
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(scale(lo) <= scale(hi));
    }

    #[test]
    fn protocol_round_trip(m in common::message(), seq: u8) {
        let bytes = encode(&m, seq).unwrap();
        prop_assert_eq!(bytes.len(), 6 + bytes[1] as usize);
        let f = decode(&bytes).unwrap();
        prop_assert_eq!(f.seq, seq);
        prop_assert_eq!(f.message, m);
    }

    #[test]
    fn state_heading_never_36000(psi in -1e4f64..1e4) {
        let s = StateMsg::from_physical(0.0, 0.0, 0.0, psi, 0.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        prop_assert!(s.psi_cdeg < 36000);
    }

    #[test]
    fn framing_survives_garbage(
        frames in prop::collection::vec((common::message(), any::<u8>()), 1..12),
        garbage in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 12),
        chunk in 1usize..64,
    ) {
        let mut stream = Vec::new();
        let mut expected = Vec::new();
        for (i, (m, seq)) in frames.iter().enumerate() {
            stream.extend_from_slice(&garbage[i]);
            stream.extend_from_slice(&encode(m, *seq).unwrap());
            expected.push((m.clone(), *seq));
        }
        let mut parser = StreamParser::new();
        let mut got = Vec::new();
        for c in stream.chunks(chunk) {
            for e in parser.feed(c) {
                if let ParseEvent::Frame(f) = e {
                    got.push((f.message, f.seq));
                }
            }
        }
        // every intact frame appears, in order
        let mut it = got.iter();
        for e in &expected {
            prop_assert!(it.any(|g| g == e), "lost {:?}", e);
        }
    }

    #[test]
    fn heading_stays_wrapped(l in -1.0f64..1.0, r in -1.0f64..1.0, psi in 0.0f64..360.0) {
        let plant = common::plant();
        let mut s = VesselState::at_rest(0.0, 0.0, psi);
        let mut a = ActuatorState::default();
        let cmd = PwmPair { left: plant.thruster.pwm(l), right: plant.thruster.pwm(r) };
        for _ in 0..50 {
            s = step(&s, &mut a, cmd, &EnvironmentField::calm(), &plant, 0.02).unwrap();
            prop_assert!(s.psi >= 0.0 && s.psi < 360.0);
            prop_assert!(s.is_finite());
        }
    }
}

fn sector_value(bin: &[f64], delta: f64) -> f64 {
    let sweep = LidarSweep {
        samples: bin.iter().map(|d| LidarSample { bearing: 0.0, distance: *d, quality: 100 }).collect(),
    };
    downsample(&sweep, 0, delta)[0].unwrap()
}

/// The exponential weighting is not monotone in a single far sample: pulling
/// an outlier in to about 1.3 delta above the minimum raises the value.
#[test]
fn outlier_pull_in_raises_value() {
    let far = sector_value(&[0.5, 32.3], 0.5);
    let near = sector_value(&[0.5, 0.5 + 1.28 * 0.5], 0.5);
    assert!((far - 0.5).abs() < 1e-12);
    assert!(near - far > 0.13 && near - far < 0.5 / std::f64::consts::E);
}

#[test]
fn message_helpers_are_consistent() {
    let hb = Message::Heartbeat(Heartbeat { mode: 3, armed: 0, health: 1 });
    assert_eq!(decode(&encode(&hb, 255).unwrap()).unwrap().message, hb);
    let o = Message::Obstacle(ObstacleMsg { t_ms: 7, distances: [NO_READING; SECTOR_COUNT] });
    assert_eq!(encode(&o, 0).unwrap().len(), 154);
}
