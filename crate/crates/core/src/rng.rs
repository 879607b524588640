//! Philox4x32-10 counter-based generator.
//!
//! Every random draw is a pure function of `(key, counter)`, so a pixel's
//! noise depends only on the seed and its `(row, col, frame)` coordinates,
//! never on the order in which pixels are visited.

use rand::RngCore;

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let p = a as u64 * b as u64;
    ((p >> 32) as u32, p as u32)
}

/// One Philox4x32 block with 10 rounds.
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for round in 0..10 {
        if round > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        let (hi0, lo0) = mulhilo(M0, ctr[0]);
        let (hi1, lo1) = mulhilo(M1, ctr[2]);
        ctr = [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0];
    }
    ctr
}

/// Random stream of one `(row, col, frame)` cell under a 64-bit seed.
///
/// The fourth counter word indexes successive blocks, giving each cell
/// 2^32 blocks of four words.
#[derive(Debug, Clone)]
pub struct CellStream {
    key: [u32; 2],
    ctr: [u32; 4],
    buf: [u32; 4],
    used: usize,
}

impl CellStream {
    pub fn new(seed: u64, row: u32, col: u32, frame: u32) -> Self {
        Self {
            key: [seed as u32, (seed >> 32) as u32],
            ctr: [col, row, frame, 0],
            buf: [0; 4],
            used: 4,
        }
    }

    fn refill(&mut self) {
        self.buf = philox4x32_10(self.ctr, self.key);
        self.ctr[3] = self.ctr[3].wrapping_add(1);
        self.used = 0;
    }

    /// Uniform in the open interval (0, 1), 53 bits.
    pub fn open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CellStream {
    fn next_u32(&mut self) -> u32 {
        if self.used == 4 {
            self.refill();
        }
        let v = self.buf[self.used];
        self.used += 1;
        v
    }

    fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        (hi << 32) | lo
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(4) {
            let b = self.next_u32().to_le_bytes();
            chunk.copy_from_slice(&b[..chunk.len()]);
        }
    }
}

/// Derives an independent 64-bit seed for a labelled sub-stream.
pub fn derive_seed(seed: u64, domain: u32, index: u64) -> u64 {
    let out = philox4x32_10([index as u32, (index >> 32) as u32, domain, 0xFFFF_FFFF], [seed as u32, (seed >> 32) as u32]);
    (out[1] as u64) << 32 | out[0] as u64
}
