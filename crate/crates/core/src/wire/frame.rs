use super::crc::compute_checksum;
use super::message::{spec_for_id, Message};
use super::signing::{compute_signature, Keystore, Signature, SigningContext};
use super::WireError;

pub const MAGIC_V2: u8 = 0xFD;
pub const MAGIC_V1: u8 = 0xFE;
/// Magic byte plus the nine header bytes that follow it.
pub const HEADER_LEN: usize = 10;
pub const CHECKSUM_LEN: usize = 2;
pub const MAX_PAYLOAD_LEN: usize = 255;
pub const MAX_FRAME_LEN: usize = HEADER_LEN + MAX_PAYLOAD_LEN + CHECKSUM_LEN + Signature::LEN;

pub const INCOMPAT_FLAG_SIGNED: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub magic: u8,
    pub payload_len: u8,
    pub incompat_flags: u8,
    pub compat_flags: u8,
    pub seq: u8,
    pub sys_id: u8,
    pub comp_id: u8,
    pub msg_id: u32,
}

impl FrameHeader {
    pub fn is_signed(&self) -> bool {
        self.incompat_flags & INCOMPAT_FLAG_SIGNED != 0
    }

    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let id = self.msg_id.to_le_bytes();
        [
            self.magic,
            self.payload_len,
            self.incompat_flags,
            self.compat_flags,
            self.seq,
            self.sys_id,
            self.comp_id,
            id[0],
            id[1],
            id[2],
        ]
    }

    fn from_bytes(b: &[u8; HEADER_LEN]) -> Self {
        Self {
            magic: b[0],
            payload_len: b[1],
            incompat_flags: b[2],
            compat_flags: b[3],
            seq: b[4],
            sys_id: b[5],
            comp_id: b[6],
            msg_id: u32::from_le_bytes([b[7], b[8], b[9], 0]),
        }
    }
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: FrameHeader,
    pub message: Message,
    pub signature: Option<Signature>,
}

/// Drops trailing zero bytes, keeping at least one.
fn truncated_len(payload: &[u8]) -> usize {
    payload.iter().rposition(|&b| b != 0).map_or(1, |i| i + 1)
}

/// Serializes `msg` into a v2 frame, signed when `signing` is supplied.
pub fn encode_frame(
    msg: &Message,
    seq: u8,
    sys_id: u8,
    comp_id: u8,
    signing: Option<&mut SigningContext>,
) -> Result<Vec<u8>, WireError> {
    if sys_id == 0 {
        return Err(WireError::InvalidField { field: "sys_id", value: 0 });
    }
    if comp_id == 0 {
        return Err(WireError::InvalidField { field: "comp_id", value: 0 });
    }
    let payload = msg.serialize_payload();
    if payload.len() > MAX_PAYLOAD_LEN {
        return Err(WireError::PayloadTooLarge(payload.len()));
    }
    let payload = &payload[..truncated_len(&payload)];
    let spec = msg.spec();

    let header = FrameHeader {
        magic: MAGIC_V2,
        payload_len: payload.len() as u8,
        incompat_flags: if signing.is_some() { INCOMPAT_FLAG_SIGNED } else { 0 },
        compat_flags: 0,
        seq,
        sys_id,
        comp_id,
        msg_id: spec.msg_id,
    };

    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN + Signature::LEN);
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(payload);
    let crc = compute_checksum(&out[1..], spec.crc_extra);
    out.extend_from_slice(&crc.to_le_bytes());

    if let Some(ctx) = signing {
        let timestamp = ctx.next_timestamp(sys_id, comp_id);
        let sig = compute_signature(ctx.secret(), &out, ctx.link_id, timestamp);
        let block = Signature { link_id: ctx.link_id, timestamp, sig };
        out.extend_from_slice(&block.to_bytes());
    }
    Ok(out)
}

/// Parses and validates exactly one frame.
///
/// With a keystore, signed frames are authenticated and replay-checked before
/// the message is returned, and unsigned frames are refused if the keystore
/// requires signing. Without one, any signature block is returned unverified
/// (inspection mode, as used by the dump tool).
pub fn decode_frame(bytes: &[u8], keystore: Option<&mut Keystore>) -> Result<Frame, WireError> {
    if bytes.is_empty() {
        return Err(WireError::TruncatedFrame { needed: HEADER_LEN, got: 0 });
    }
    match bytes[0] {
        MAGIC_V2 => {}
        MAGIC_V1 => return Err(WireError::UnsupportedVersion),
        other => return Err(WireError::BadMagic(other)),
    }
    if bytes.len() < HEADER_LEN {
        return Err(WireError::TruncatedFrame { needed: HEADER_LEN, got: bytes.len() });
    }
    let header = FrameHeader::from_bytes(bytes[..HEADER_LEN].try_into().expect("length checked"));
    if header.incompat_flags & !INCOMPAT_FLAG_SIGNED != 0 {
        return Err(WireError::UnsupportedFlags(header.incompat_flags));
    }
    let body_end = HEADER_LEN + header.payload_len as usize + CHECKSUM_LEN;
    let total = body_end + if header.is_signed() { Signature::LEN } else { 0 };
    if bytes.len() < total {
        return Err(WireError::TruncatedFrame { needed: total, got: bytes.len() });
    }
    if bytes.len() > total {
        return Err(WireError::TrailingBytes(bytes.len() - total));
    }

    let spec = spec_for_id(header.msg_id).ok_or(WireError::UnknownMsgId(header.msg_id))?;
    let crc_at = body_end - CHECKSUM_LEN;
    let received = u16::from_le_bytes([bytes[crc_at], bytes[crc_at + 1]]);
    let computed = compute_checksum(&bytes[1..crc_at], spec.crc_extra);
    if received != computed {
        return Err(WireError::ChecksumMismatch { expected: computed, received });
    }

    let signature = if header.is_signed() {
        let block: &[u8; Signature::LEN] = bytes[body_end..].try_into().expect("length checked");
        Some(Signature::from_bytes(block))
    } else {
        None
    };

    if let Some(ks) = keystore {
        match &signature {
            Some(sig) => {
                let key = ks.key(sig.link_id).ok_or(WireError::SignatureInvalid)?;
                if compute_signature(key, &bytes[..body_end], sig.link_id, sig.timestamp) != sig.sig {
                    return Err(WireError::SignatureInvalid);
                }
                let stream = (sig.link_id, header.sys_id, header.comp_id);
                if !ks.is_fresh(stream, sig.timestamp) {
                    return Err(WireError::StaleTimestamp(sig.timestamp));
                }
                let message = Message::deserialize_payload(header.msg_id, &bytes[HEADER_LEN..crc_at])?;
                ks.accept(stream, sig.timestamp);
                return Ok(Frame { header, message, signature });
            }
            None if ks.require_signed => return Err(WireError::SignatureMissing),
            None => {}
        }
    }

    let message = Message::deserialize_payload(header.msg_id, &bytes[HEADER_LEN..crc_at])?;
    Ok(Frame { header, message, signature })
}

/// Decodes a frame without verification and lists every header, payload and
/// signature field as `(name, value)`.
pub fn dump_fields(bytes: &[u8]) -> Result<Vec<(&'static str, String)>, WireError> {
    let frame = decode_frame(bytes, None)?;
    let h = frame.header;
    let mut fields = vec![
        ("magic", format!("0x{:02X}", h.magic)),
        ("payload_len", h.payload_len.to_string()),
        ("incompat_flags", format!("0x{:02X}", h.incompat_flags)),
        ("compat_flags", format!("0x{:02X}", h.compat_flags)),
        ("seq", h.seq.to_string()),
        ("sys_id", h.sys_id.to_string()),
        ("comp_id", h.comp_id.to_string()),
        ("msg_id", h.msg_id.to_string()),
        ("msg_name", frame.message.spec().name.to_string()),
    ];
    fields.extend(frame.message.fields());
    let crc_at = HEADER_LEN + h.payload_len as usize;
    fields.push((
        "checksum",
        format!("0x{:04X}", u16::from_le_bytes([bytes[crc_at], bytes[crc_at + 1]])),
    ));
    if let Some(sig) = frame.signature {
        fields.push(("link_id", sig.link_id.to_string()));
        fields.push(("timestamp", sig.timestamp.to_string()));
        fields.push(("signature", sig.sig.iter().map(|b| format!("{b:02x}")).collect()));
    }
    Ok(fields)
}
