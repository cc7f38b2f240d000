use helm::config::load_str;
use helm::log::{RunLog, TickRecord};
use helm::metrics::{compute_metrics, distance_to_segment};
use helm::mission::{MissionItem, MissionPlan};
use helm::run_mission;
use helm_core::control::ControlMode;

/// A real one-second log to borrow a header, outcome and tick layout from.
fn template(plan: &MissionPlan) -> (RunLog, TickRecord) {
    let c = load_str(
        "preset = \"bep-echoboat-160\"\n[mission]\nitems = [{ kind = \"wait\", duration = 1.0 }]\n",
    )
    .unwrap();
    let mut log = run_mission(&c, &c.plan().unwrap());
    log.header.plan = plan.clone();
    let t = log.ticks[0].clone();
    (log, t)
}

fn synthetic(plan: MissionPlan, n: usize, f: impl Fn(usize, &mut TickRecord)) -> RunLog {
    let (mut log, template) = template(&plan);
    log.ticks = (0..n)
        .map(|k| {
            let mut t = template.clone();
            t.tick = k as u64;
            t.t = k as f64 / 10.0;
            t.events.clear();
            f(k, &mut t);
            t
        })
        .collect();
    log
}

fn two_leg_plan() -> MissionPlan {
    let wp = |x, y| MissionItem::Waypoint {
        x,
        y,
        accept_radius: 2.0,
        transit_speed: 1.0,
    };
    MissionPlan::new(vec![wp(0.0, 0.0), wp(0.0, 100.0)])
}

fn on_leg(offset: f64) -> RunLog {
    synthetic(two_leg_plan(), 1000, |k, t| {
        t.item = Some(1);
        t.mode = ControlMode::GuidedPosition;
        t.measured.x = offset;
        t.measured.y = k as f64 * 0.1;
    })
}

#[test]
fn perfect_straight_leg_has_no_cross_track() {
    let log = on_leg(0.0);
    let m = compute_metrics(&log, &log.header.plan);
    let xt = m.legs[0].cross_track.unwrap();
    assert_eq!(xt.samples, 1000);
    assert!(xt.max_abs < 1e-12, "{xt:?}");
    assert_eq!(m.legs[0].from, [0.0, 0.0]);
    assert_eq!(m.legs[0].to, [0.0, 100.0]);
}

#[test]
fn parallel_offset_gives_unit_cross_track() {
    let log = on_leg(1.0);
    let m = compute_metrics(&log, &log.header.plan);
    let xt = m.legs[0].cross_track.unwrap();
    assert!((xt.mean_abs - 1.0).abs() < 1e-12);
    assert!((xt.rmse - 1.0).abs() < 1e-12);
    assert!(m.legs[0].time_to_waypoint.is_none());
}

#[test]
fn constant_heading_error_gives_its_rmse() {
    let plan = MissionPlan {
        settle_window: 20.0,
        ..MissionPlan::new(vec![MissionItem::VelHeadLeg {
            speed: 1.0,
            heading: 358.0,
            duration: 100.0,
        }])
    };
    let log = synthetic(plan, 1000, |k, t| {
        t.item = Some(0);
        t.mode = ControlMode::GuidedVelocityHeading;
        t.heading_sp = Some(358.0);
        t.speed_sp = 1.0;
        t.measured.speed = 1.0;
        // 5 deg clockwise of the setpoint, across north
        t.measured.psi = 3.0;
        if k < 200 {
            t.measured.psi = 180.0;
        }
    });
    let m = compute_metrics(&log, &log.header.plan);
    assert!((m.heading_rmse.unwrap() - 5.0).abs() < 1e-9, "{:?}", m.heading_rmse);
    assert_eq!(m.speed_rmse, Some(0.0));
    assert_eq!(m.steady[0].heading.samples, 800);
    assert_eq!(m.steady[0].start, 20.0);
}

#[test]
fn metrics_are_non_negative_on_real_runs() {
    for name in ["slow-leg", "waypoint-box"] {
        let c = helm::load_file(&std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/{name}.toml")))
            .unwrap();
        let plan = c.plan().unwrap();
        let m = compute_metrics(&run_mission(&c, &plan), &plan);
        let mut values = vec![m.duration, m.energy_ah, m.energy_wh];
        values.extend(m.speed_rmse);
        values.extend(m.heading_rmse);
        values.extend(m.loiter_max_excursion);
        for l in &m.legs {
            values.extend(l.cross_track.map(|c| c.rmse));
            values.extend(l.time_to_waypoint);
            values.extend(l.arrival_error);
        }
        assert!(values.iter().all(|v| *v >= 0.0 && v.is_finite()), "{name}: {values:?}");
    }
}

#[test]
fn segment_geometry() {
    assert_eq!(distance_to_segment([3.0, 4.0], [0.0, 0.0], [0.0, 10.0]), 3.0);
    assert_eq!(distance_to_segment([0.0, 13.0], [0.0, 0.0], [0.0, 10.0]), 3.0);
}
