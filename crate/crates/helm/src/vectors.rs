//! Reference frames for checking other helm-link implementations.

use helm_core::protocol::{encode, Frame, Heartbeat, Message, ObstacleMsg, StateMsg};
use helm_core::perception::{NO_READING, SECTOR_COUNT};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    /// The complete frame, lowercase hex.
    pub hex: String,
    pub seq: u8,
    pub message: Message,
}

pub fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn from_hex(s: &str) -> Option<Vec<u8>> {
    if !s.len().is_multiple_of(2) {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

fn frames() -> Vec<Frame> {
    let mut distances = [NO_READING; SECTOR_COUNT];
    distances[0] = 250;
    distances[1] = 1200;
    distances[SECTOR_COUNT - 1] = 3;
    let msgs = vec![
        Message::Heartbeat(Heartbeat {
            mode: 0,
            armed: 0,
            health: 0,
        }),
        Message::Heartbeat(Heartbeat {
            mode: 5,
            armed: 1,
            health: 0b1010,
        }),
        Message::State(StateMsg {
            t_ms: 123_456,
            x_mm: -15_250,
            y_mm: 40_000,
            psi_cdeg: 35_500,
            u_mms: 1_500,
            v_mms: -20,
            r_cdps: -350,
            thr_l_permille: 700,
            thr_r_permille: -1000,
        }),
        Message::Obstacle(ObstacleMsg { t_ms: 2_000, distances }),
        Message::SetThrust { left: 1000, right: -250 },
        Message::SetVelHead {
            speed_mms: 500,
            heading_cdeg: 35_500,
        },
        Message::SetWaypoint {
            x_mm: 10_000,
            y_mm: -20_000,
            accept_radius_cm: 0,
        },
        Message::SetWaypoint {
            x_mm: i32::MIN,
            y_mm: i32::MAX,
            accept_radius_cm: 150,
        },
        Message::SetMode { mode: 2 },
        Message::Arm { flag: 1 },
        Message::Ack {
            acked_id: 0x12,
            result: 1,
        },
        Message::Unknown {
            id: 0x42,
            payload: vec![0xde, 0xad, 0xbe, 0xef],
        },
    ];
    msgs.into_iter()
        .enumerate()
        .map(|(i, message)| Frame {
            seq: if i == 0 { 0 } else { 250u8.wrapping_add(i as u8 * 7) },
            message,
        })
        .collect()
}

pub fn vectors() -> Vec<Vector> {
    frames()
        .into_iter()
        .map(|f| Vector {
            hex: to_hex(&encode(&f.message, f.seq).expect("vector encodes")),
            seq: f.seq,
            message: f.message,
        })
        .collect()
}

pub fn vectors_json() -> String {
    let mut s = serde_json::to_string_pretty(&vectors()).expect("vectors serialize");
    s.push('\n');
    s
}
