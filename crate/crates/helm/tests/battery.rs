mod common;

use common::shipped;
use helm::battery::{Battery, BatteryConfig};
use helm::config::load_str;
use helm::run_mission;

#[test]
fn endurance_at_cruise_matches_the_presets() {
    let bep = shipped("bep-default");
    let h = bep.file.battery.endurance_hours(&bep.plant, bep.file.control.cruise_speed);
    assert!((h - 3.0).abs() < 0.15, "BEP {h} h");
    let nac = shipped("nac-default");
    let m = 60.0 * nac.file.battery.endurance_hours(&nac.plant, nac.file.control.cruise_speed);
    assert!((m - 40.0).abs() < 2.0, "NAC {m} min");
}

/// The drain integrated in a closed-loop cruise agrees with the static
/// estimate.
#[test]
fn simulated_cruise_drain() {
    for (preset, speed, hours) in [("bep-echoboat-160", 1.5, 3.0), ("nac-kayak", 1.2, 40.0 / 60.0)] {
        let c = load_str(&format!(
            "preset = \"{preset}\"\n[environment.noise]\nposition = 0.0\nheading = 0.0\nspeed = 0.0\nyaw_rate = 0.0\n[mission]\nitems = [{{ kind = \"vel_head_leg\", speed = {speed}, heading = 90.0, duration = 120.0 }}]\n"
        ))
        .unwrap();
        let log = run_mission(&c, &c.plan().unwrap());
        let a = &log.ticks[600];
        let b = log.ticks.last().unwrap();
        let rate = (b.energy_ah - a.energy_ah) / ((b.t - a.t) / 3600.0);
        let endurance = c.file.battery.capacity_ah / rate;
        assert!((endurance / hours - 1.0).abs() < 0.1, "{preset}: {endurance} h");
    }
}

#[test]
fn drain_and_fraction() {
    let mut b = Battery::new(BatteryConfig {
        capacity_ah: 10.0,
        initial_fraction: 0.5,
        ..BatteryConfig::default()
    });
    assert_eq!(b.fraction(), 0.5);
    b.drain(3600.0, 1.0);
    assert!((b.used_ah() - 1.0).abs() < 1e-12);
    assert!((b.fraction() - 0.4).abs() < 1e-12);
    b.drain(-5.0, 1.0);
    assert!((b.used_ah() - 1.0).abs() < 1e-12);
    b.drain(3600.0 * 10.0, 1.0);
    assert_eq!(b.fraction(), 0.0);
    assert!((b.used_wh() - 11.0 * 22.2).abs() < 1e-9);
}

#[test]
fn invalid_battery_is_a_config_error() {
    let e = load_str("preset = \"bep-echoboat-160\"\n[battery]\ncapacity_ah = 0.0\n").unwrap_err();
    assert!(e.to_string().contains("battery.capacity_ah"), "{e}");
}
