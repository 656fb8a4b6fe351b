//! Built-in topic message schemas with fixed little-endian layouts.
//!
//! | topic      | id | layout                                   | bytes |
//! |------------|----|------------------------------------------|-------|
//! | /cmd_vel   | 1  | 2 x f64 (linear, angular)                | 16    |
//! | /laser     | 2  | 8 x f32 ranges + 8 x u16 intensities     | 48    |
//! | /odom      | 3  | 3 x f64 pose + 3 x f64 velocity          | 48    |
//! | /led       | 4  | 2 x 3 bytes RGB                          | 6     |
//! | /imu       | 5  | 6 x f32 (accel xyz, gyro xyz)            | 24    |
//!
//! Topic id 0 is reserved for broker control messages.

use super::ProtocolError;

pub const TOPIC_CONTROL: u16 = 0;
pub const TOPIC_CMD_VEL: u16 = 1;
pub const TOPIC_LASER: u16 = 2;
pub const TOPIC_ODOM: u16 = 3;
pub const TOPIC_LED: u16 = 4;
pub const TOPIC_IMU: u16 = 5;

pub const TOPIC_NAMES: [(&str, u16); 5] = [
    ("/cmd_vel", TOPIC_CMD_VEL),
    ("/laser", TOPIC_LASER),
    ("/odom", TOPIC_ODOM),
    ("/led", TOPIC_LED),
    ("/imu", TOPIC_IMU),
];

fn malformed(topic: u16, expected: usize, got: usize) -> ProtocolError {
    ProtocolError::MalformedMessage {
        topic,
        reason: format!("expected {expected} bytes, got {got}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CmdVelMsg {
    pub linear: f64,
    pub angular: f64,
}

impl CmdVelMsg {
    pub const WIRE_SIZE: usize = 16;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_SIZE);
        out.extend_from_slice(&self.linear.to_le_bytes());
        out.extend_from_slice(&self.angular.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(malformed(TOPIC_CMD_VEL, Self::WIRE_SIZE, bytes.len()));
        }
        Ok(CmdVelMsg {
            linear: f64::from_le_bytes(bytes[0..8].try_into().unwrap()),
            angular: f64::from_le_bytes(bytes[8..16].try_into().unwrap()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaserMsg {
    pub ranges_m: [f32; 8],
    pub intensities: [u16; 8],
}

impl LaserMsg {
    pub const WIRE_SIZE: usize = 48;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_SIZE);
        for r in &self.ranges_m {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for i in &self.intensities {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(malformed(TOPIC_LASER, Self::WIRE_SIZE, bytes.len()));
        }
        let mut msg = LaserMsg::default();
        for (k, chunk) in bytes[0..32].chunks_exact(4).enumerate() {
            msg.ranges_m[k] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        for (k, chunk) in bytes[32..48].chunks_exact(2).enumerate() {
            msg.intensities[k] = u16::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(msg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdomMsg {
    /// x, y, heading.
    pub pose: [f64; 3],
    /// Body-frame linear, lateral, angular velocity.
    pub velocity: [f64; 3],
}

impl OdomMsg {
    pub const WIRE_SIZE: usize = 48;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_SIZE);
        for v in self.pose.iter().chain(&self.velocity) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(malformed(TOPIC_ODOM, Self::WIRE_SIZE, bytes.len()));
        }
        let mut vals = [0f64; 6];
        for (k, chunk) in bytes.chunks_exact(8).enumerate() {
            vals[k] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(OdomMsg {
            pose: [vals[0], vals[1], vals[2]],
            velocity: [vals[3], vals[4], vals[5]],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LedMsg {
    pub colors: [[u8; 3]; 2],
}

impl LedMsg {
    pub const WIRE_SIZE: usize = 6;

    pub fn encode(&self) -> Vec<u8> {
        self.colors.concat()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(malformed(TOPIC_LED, Self::WIRE_SIZE, bytes.len()));
        }
        Ok(LedMsg {
            colors: [
                [bytes[0], bytes[1], bytes[2]],
                [bytes[3], bytes[4], bytes[5]],
            ],
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ImuMsg {
    pub accel: [f32; 3],
    pub gyro: [f32; 3],
}

impl ImuMsg {
    pub const WIRE_SIZE: usize = 24;

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::WIRE_SIZE);
        for v in self.accel.iter().chain(&self.gyro) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        if bytes.len() != Self::WIRE_SIZE {
            return Err(malformed(TOPIC_IMU, Self::WIRE_SIZE, bytes.len()));
        }
        let mut vals = [0f32; 6];
        for (k, chunk) in bytes.chunks_exact(4).enumerate() {
            vals[k] = f32::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(ImuMsg {
            accel: [vals[0], vals[1], vals[2]],
            gyro: [vals[3], vals[4], vals[5]],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wire_sizes() {
        assert_eq!(CmdVelMsg::default().encode().len(), CmdVelMsg::WIRE_SIZE);
        assert_eq!(LaserMsg::default().encode().len(), LaserMsg::WIRE_SIZE);
        assert_eq!(OdomMsg::default().encode().len(), OdomMsg::WIRE_SIZE);
        assert_eq!(LedMsg::default().encode().len(), LedMsg::WIRE_SIZE);
        assert_eq!(ImuMsg::default().encode().len(), ImuMsg::WIRE_SIZE);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        assert!(CmdVelMsg::decode(&[0u8; 15]).is_err());
        assert!(LaserMsg::decode(&[0u8; 49]).is_err());
        assert!(OdomMsg::decode(&[]).is_err());
    }

    proptest! {
        #[test]
        fn cmd_vel_round_trip(linear in -1.0f64..1.0, angular in -10.0f64..10.0) {
            let msg = CmdVelMsg { linear, angular };
            prop_assert_eq!(CmdVelMsg::decode(&msg.encode()).unwrap(), msg);
        }

        #[test]
        fn odom_round_trip(vals in proptest::array::uniform6(-100.0f64..100.0)) {
            let msg = OdomMsg {
                pose: [vals[0], vals[1], vals[2]],
                velocity: [vals[3], vals[4], vals[5]],
            };
            prop_assert_eq!(OdomMsg::decode(&msg.encode()).unwrap(), msg);
        }

        #[test]
        fn laser_round_trip(
            ranges in proptest::array::uniform8(0.0f32..0.25),
            intensities in proptest::array::uniform8(0u16..1024),
        ) {
            let msg = LaserMsg { ranges_m: ranges, intensities };
            prop_assert_eq!(LaserMsg::decode(&msg.encode()).unwrap(), msg);
        }

        #[test]
        fn led_and_imu_round_trip(
            c in proptest::array::uniform6(any::<u8>()),
            a in proptest::array::uniform6(-20.0f32..20.0),
        ) {
            let led = LedMsg { colors: [[c[0], c[1], c[2]], [c[3], c[4], c[5]]] };
            prop_assert_eq!(LedMsg::decode(&led.encode()).unwrap(), led);
            let imu = ImuMsg { accel: [a[0], a[1], a[2]], gyro: [a[3], a[4], a[5]] };
            prop_assert_eq!(ImuMsg::decode(&imu.encode()).unwrap(), imu);
        }
    }
}
