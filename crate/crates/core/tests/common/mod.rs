#![allow(dead_code)]

use helm_core::dynamics::{BodyParams, Plant, ThrusterModel};
use helm_core::hydrostatics::{CoefficientOverrides, DragModel, FluidProperties, HullGeometry};
use helm_core::perception::SECTOR_COUNT;
use helm_core::protocol::{payload_len, Heartbeat, Message, ObstacleMsg, StateMsg};
use proptest::prelude::*;

pub fn plant() -> Plant {
    Plant {
        body: BodyParams::for_hull(77.0, 1.7, 0.8),
        thruster: ThrusterModel::default(),
        thrusters_per_side: 1,
        drag: DragModel {
            geometry: HullGeometry {
                length: 1.7,
                beam: 0.8,
                draft: 0.25,
                displaced_volume: 0.077,
                midsection_area: 0.231,
                waterplane_area: 1.075,
                mass: 77.0,
            },
            fluid: FluidProperties::default(),
            overrides: CoefficientOverrides::table_calibrated(),
        },
    }
}

pub fn state() -> impl Strategy<Value = StateMsg> {
    (
        any::<u32>(),
        any::<i32>(),
        any::<i32>(),
        0u16..36000,
        any::<i16>(),
        any::<i16>(),
        any::<i16>(),
        -1000i16..=1000,
        -1000i16..=1000,
    )
        .prop_map(|(t_ms, x_mm, y_mm, psi_cdeg, u_mms, v_mms, r_cdps, l, r)| StateMsg {
            t_ms,
            x_mm,
            y_mm,
            psi_cdeg,
            u_mms,
            v_mms,
            r_cdps,
            thr_l_permille: l,
            thr_r_permille: r,
        })
}

pub fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        (any::<u8>(), any::<u8>(), any::<u8>())
            .prop_map(|(mode, armed, health)| Message::Heartbeat(Heartbeat { mode, armed, health })),
        state().prop_map(Message::State),
        (any::<u32>(), prop::collection::vec(any::<u16>(), SECTOR_COUNT)).prop_map(|(t_ms, d)| {
            Message::Obstacle(ObstacleMsg {
                t_ms,
                distances: d.try_into().unwrap(),
            })
        }),
        (any::<i16>(), any::<i16>()).prop_map(|(left, right)| Message::SetThrust { left, right }),
        (any::<u16>(), any::<u16>()).prop_map(|(speed_mms, heading_cdeg)| Message::SetVelHead {
            speed_mms,
            heading_cdeg
        }),
        (any::<i32>(), any::<i32>(), any::<u16>()).prop_map(|(x_mm, y_mm, accept_radius_cm)| {
            Message::SetWaypoint {
                x_mm,
                y_mm,
                accept_radius_cm,
            }
        }),
        any::<u8>().prop_map(|mode| Message::SetMode { mode }),
        any::<u8>().prop_map(|flag| Message::Arm { flag }),
        (any::<u8>(), any::<u8>()).prop_map(|(acked_id, result)| Message::Ack { acked_id, result }),
        (
            any::<u8>().prop_filter("unassigned id", |id| payload_len(*id).is_none()),
            prop::collection::vec(any::<u8>(), 0..=250)
        )
            .prop_map(|(id, payload)| Message::Unknown { id, payload }),
    ]
}
