//! CRC-16/X.25 (reflected poly 0x1021, init 0xFFFF, xorout 0xFFFF).
//!
//! The frame checksum runs the CRC over header and payload (magic byte
//! excluded) and then folds in the per-message `crc_extra` seed byte.

const POLY_REFLECTED: u16 = 0x8408;
const INIT: u16 = 0xFFFF;
const XOR_OUT: u16 = 0xFFFF;

const TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u16;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 1 != 0 {
                (crc >> 1) ^ POLY_REFLECTED
            } else {
                crc >> 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// Running CRC register. `finish` applies the output XOR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crc16X25 {
    register: u16,
}

impl Default for Crc16X25 {
    fn default() -> Self {
        Self::new()
    }
}

impl Crc16X25 {
    pub const fn new() -> Self {
        Self { register: INIT }
    }

    pub const fn update_byte(self, byte: u8) -> Self {
        let idx = ((self.register ^ byte as u16) & 0xFF) as usize;
        Self {
            register: (self.register >> 8) ^ TABLE[idx],
        }
    }

    pub fn update(mut self, bytes: &[u8]) -> Self {
        for &b in bytes {
            self = self.update_byte(b);
        }
        self
    }

    /// Raw register without the output XOR. This is what MAVLink's
    /// `crc_accumulate` leaves behind, and what the `crc_extra` seeding rule uses.
    pub const fn register(self) -> u16 {
        self.register
    }

    pub const fn finish(self) -> u16 {
        self.register ^ XOR_OUT
    }
}

/// Frame checksum: CRC-16/X.25 over `header_and_payload`, then over `crc_extra`.
pub fn compute_checksum(header_and_payload: &[u8], crc_extra: u8) -> u16 {
    Crc16X25::new()
        .update(header_and_payload)
        .update_byte(crc_extra)
        .finish()
}

/// Derives a message's `crc_extra` byte from its definition, following the
/// MAVLink generator: accumulate `"NAME "`, then `"type name "` for every
/// field in wire order, and fold the high byte into the low byte.
pub const fn crc_extra(name: &str, fields: &[(&str, &str)]) -> u8 {
    let mut crc = Crc16X25::new();
    crc = accumulate_str(crc, name);
    crc = crc.update_byte(b' ');
    let mut i = 0;
    while i < fields.len() {
        crc = accumulate_str(crc, fields[i].0);
        crc = crc.update_byte(b' ');
        crc = accumulate_str(crc, fields[i].1);
        crc = crc.update_byte(b' ');
        i += 1;
    }
    let reg = crc.register();
    ((reg & 0xFF) ^ (reg >> 8)) as u8
}

const fn accumulate_str(mut crc: Crc16X25, s: &str) -> Crc16X25 {
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        crc = crc.update_byte(bytes[i]);
        i += 1;
    }
    crc
}

#[cfg(test)]
mod tests {
    use super::*;

    // Bit-serial reference, no table.
    fn bitwise_x25(data: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &byte in data {
            crc ^= byte as u16;
            for _ in 0..8 {
                crc = if crc & 1 == 1 { (crc >> 1) ^ 0x8408 } else { crc >> 1 };
            }
        }
        !crc
    }

    #[test]
    fn check_value() {
        assert_eq!(Crc16X25::new().update(b"123456789").finish(), 0x906E);
        assert_eq!(bitwise_x25(b"123456789"), 0x906E);
    }

    #[test]
    fn empty_input_equals_crc_of_single_zero_byte() {
        assert_eq!(compute_checksum(&[], 0), bitwise_x25(&[0x00]));
    }

    #[test]
    fn crc_extra_suffix_changes_result() {
        let data = b"autoserve";
        assert_ne!(compute_checksum(data, 0x2B), compute_checksum(data, 0x2C));
    }

    #[test]
    fn checksum_matches_bitwise_reference() {
        let data: Vec<u8> = (0u8..=200).map(|b| b.wrapping_mul(37)).collect();
        let mut with_extra = data.clone();
        with_extra.push(0x99);
        assert_eq!(compute_checksum(&data, 0x99), bitwise_x25(&with_extra));
    }

    #[test]
    fn heartbeat_crc_extra_matches_mavlink_generator() {
        // Published crc_extra of the common-set HEARTBEAT message is 50.
        let extra = crc_extra(
            "HEARTBEAT",
            &[
                ("uint32_t", "custom_mode"),
                ("uint8_t", "type"),
                ("uint8_t", "autopilot"),
                ("uint8_t", "base_mode"),
                ("uint8_t", "system_status"),
                ("uint8_t", "mavlink_version"),
            ],
        );
        assert_eq!(extra, 50);
    }
}
