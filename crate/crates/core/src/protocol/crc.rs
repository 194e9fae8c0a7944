//! CRC-16/CCITT-FALSE: polynomial 0x1021, init 0xFFFF, no reflection,
//! no final xor.

use crc::{Crc, Digest, CRC_16_IBM_3740};

static CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// Incremental checksum.
#[derive(Clone)]
pub struct Crc16(Digest<'static, u16>);

impl Default for Crc16 {
    fn default() -> Self {
        Crc16(CCITT_FALSE.digest())
    }
}

impl Crc16 {
    pub fn update(&mut self, data: &[u8]) {
        self.0.update(data);
    }

    pub fn finish(self) -> u16 {
        self.0.finalize()
    }
}

pub fn crc16(data: &[u8]) -> u16 {
    CCITT_FALSE.checksum(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_value() {
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc16(b""), 0xFFFF);
    }

    #[test]
    fn incremental_matches_oneshot() {
        let data: Vec<u8> = (0..=255).collect();
        let mut c = Crc16::default();
        c.update(&data[..100]);
        c.update(&data[100..]);
        assert_eq!(c.finish(), crc16(&data));
    }
}
