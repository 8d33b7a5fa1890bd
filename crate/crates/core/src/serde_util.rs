//! Serde adapters for config-file ergonomics.

/// Serialize a pair of radian angles as degrees (config files speak degrees,
/// the library speaks radians).
pub mod angle_pair_deg {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(angles: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
        [angles[0].to_degrees(), angles[1].to_degrees()].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
        let deg = <[f64; 2]>::deserialize(d)?;
        Ok([deg[0].to_radians(), deg[1].to_radians()])
    }
}
