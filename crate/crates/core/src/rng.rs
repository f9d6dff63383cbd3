//! Reproducible random streams for query perturbation.
//!
//! Every query gets its own substream, seeded with
//! `master_seed ^ fnv1a64(query_key)` and advanced as SplitMix64. Uniforms take
//! the top 53 bits; normals come from Box-Muller pairs consumed in order. The
//! layout is fixed so that other implementations reproduce the same draws.

use core::f64::consts::TAU;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal draws from a keyed SplitMix64 substream.
#[derive(Debug, Clone)]
pub struct NormalStream {
    uniforms: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        NormalStream {
            uniforms: SplitMix64::new(seed),
            spare: None,
        }
    }

    pub fn for_key(master_seed: u64, key: &str) -> Self {
        Self::new(master_seed ^ fnv1a64(key.as_bytes()))
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping ln finite
        let u1 = 1.0 - self.uniforms.next_f64();
        let u2 = self.uniforms.next_f64();
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = TAU * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    pub fn next_normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.next_standard()
    }
}
