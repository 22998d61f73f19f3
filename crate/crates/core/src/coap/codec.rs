//! CoAP wire format: the 4-byte fixed header, the token, the three supported
//! options (ETag = 4, Observe = 6, Max-Age = 14) in delta encoding, and an
//! optional payload after the `0xFF` marker. Payload bytes are zero-filled;
//! only their count is modelled.

use crate::error::{Error, Result};

use super::message::{CoapMessage, Code, MessageType, Opaque8, Options};

const VERSION: u8 = 1;
const OPT_ETAG: u16 = 4;
const OPT_OBSERVE: u16 = 6;
const OPT_MAX_AGE: u16 = 14;
const PAYLOAD_MARKER: u8 = 0xff;

fn uint_bytes(v: u32) -> Vec<u8> {
    let b = v.to_be_bytes();
    let skip = b.iter().take_while(|x| **x == 0).count();
    b[skip..].to_vec()
}

fn push_ext(out: &mut Vec<u8>, v: u16) -> u8 {
    match v {
        0..=12 => v as u8,
        13..=268 => {
            out.push((v - 13) as u8);
            13
        }
        _ => {
            out.extend_from_slice(&(v - 269).to_be_bytes());
            14
        }
    }
}

fn push_option(out: &mut Vec<u8>, delta: u16, value: &[u8]) {
    let mut ext = Vec::with_capacity(4);
    let d = push_ext(&mut ext, delta);
    let mut ext_len = Vec::with_capacity(2);
    let l = push_ext(&mut ext_len, value.len() as u16);
    out.push((d << 4) | l);
    out.extend_from_slice(&ext);
    out.extend_from_slice(&ext_len);
    out.extend_from_slice(value);
}

pub fn encode_header(msg: &CoapMessage) -> Result<Vec<u8>> {
    let tkl = msg.token.len();
    if tkl > 8 {
        return Err(Error::Codec(format!("token length {tkl} exceeds 8")));
    }
    if let Some(seq) = msg.options.observe {
        if seq >= 1 << 24 {
            return Err(Error::Codec(format!("observe value {seq} exceeds 3 bytes")));
        }
    }
    let mut out = Vec::with_capacity(16 + msg.payload_len as usize);
    out.push((VERSION << 6) | (msg.mtype.bits() << 4) | tkl as u8);
    out.push(msg.code.to_byte());
    out.extend_from_slice(&msg.message_id.to_be_bytes());
    out.extend_from_slice(msg.token.as_bytes());

    let mut last = 0u16;
    if let Some(etag) = msg.options.etag {
        if etag.is_empty() {
            return Err(Error::Codec("ETag must be 1 to 8 bytes".into()));
        }
        push_option(&mut out, OPT_ETAG - last, etag.as_bytes());
        last = OPT_ETAG;
    }
    if let Some(seq) = msg.options.observe {
        push_option(&mut out, OPT_OBSERVE - last, &uint_bytes(seq));
        last = OPT_OBSERVE;
    }
    if let Some(age) = msg.options.max_age {
        push_option(&mut out, OPT_MAX_AGE - last, &uint_bytes(age));
    }
    if msg.payload_len > 0 {
        out.push(PAYLOAD_MARKER);
        out.resize(out.len() + msg.payload_len as usize, 0);
    }
    Ok(out)
}

fn truncated() -> Error {
    Error::Codec("truncated message".into())
}

fn read_ext(buf: &[u8], pos: &mut usize, nibble: u8) -> Result<u16> {
    match nibble {
        0..=12 => Ok(nibble as u16),
        13 => {
            let b = *buf.get(*pos).ok_or_else(truncated)?;
            *pos += 1;
            Ok(b as u16 + 13)
        }
        14 => {
            let b = buf.get(*pos..*pos + 2).ok_or_else(truncated)?;
            *pos += 2;
            Ok(u16::from_be_bytes([b[0], b[1]]).saturating_add(269))
        }
        _ => Err(Error::Codec("reserved option nibble 15".into())),
    }
}

fn read_uint(v: &[u8], max_len: usize, name: &str) -> Result<u32> {
    if v.len() > max_len {
        return Err(Error::Codec(format!("{name} value too long")));
    }
    Ok(v.iter().fold(0u32, |acc, b| (acc << 8) | *b as u32))
}

pub fn decode(buf: &[u8]) -> Result<CoapMessage> {
    if buf.len() < 4 {
        return Err(truncated());
    }
    let version = buf[0] >> 6;
    if version != VERSION {
        return Err(Error::Codec(format!("unsupported version {version}")));
    }
    let mtype = MessageType::from_bits(buf[0] >> 4);
    let tkl = (buf[0] & 0x0f) as usize;
    if tkl > 8 {
        return Err(Error::Codec(format!("token length {tkl} exceeds 8")));
    }
    let code = Code::from_byte(buf[1])?;
    let message_id = u16::from_be_bytes([buf[2], buf[3]]);
    let token = Opaque8::new(buf.get(4..4 + tkl).ok_or_else(truncated)?)?;

    let mut pos = 4 + tkl;
    let mut number = 0u16;
    let mut options = Options::default();
    let mut payload_len = 0u16;
    while pos < buf.len() {
        let head = buf[pos];
        pos += 1;
        if head == PAYLOAD_MARKER {
            let n = buf.len() - pos;
            if n == 0 {
                return Err(Error::Codec("payload marker without payload".into()));
            }
            payload_len = u16::try_from(n).map_err(|_| Error::Codec("payload too large".into()))?;
            break;
        }
        let delta = read_ext(buf, &mut pos, head >> 4)?;
        let len = read_ext(buf, &mut pos, head & 0x0f)? as usize;
        number = number
            .checked_add(delta)
            .ok_or_else(|| Error::Codec("option number overflow".into()))?;
        let value = buf.get(pos..pos + len).ok_or_else(truncated)?;
        pos += len;
        match number {
            OPT_ETAG if options.etag.is_none() && !value.is_empty() => {
                options.etag = Some(Opaque8::new(value)?)
            }
            OPT_OBSERVE if options.observe.is_none() => {
                options.observe = Some(read_uint(value, 3, "Observe")?)
            }
            OPT_MAX_AGE if options.max_age.is_none() => {
                options.max_age = Some(read_uint(value, 4, "Max-Age")?)
            }
            n => return Err(Error::Codec(format!("unsupported or repeated option {n}"))),
        }
    }
    Ok(CoapMessage {
        mtype,
        code,
        message_id,
        token,
        options,
        payload_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coap::message::Token;
    use proptest::prelude::*;

    /// Independent packer for the fixed header: Ver(2) T(2) TKL(4) | Code | MID.
    fn hand_pack(ver: u8, t: u8, tkl: u8, class: u8, detail: u8, mid: u16) -> [u8; 4] {
        [
            ver << 6 | t << 4 | tkl,
            class << 5 | detail,
            (mid >> 8) as u8,
            mid as u8,
        ]
    }

    #[test]
    fn con_get_golden_bytes() {
        let m = CoapMessage::new(MessageType::Con, Code::Get, 0x1234, Token::EMPTY);
        let bytes = encode_header(&m).unwrap();
        assert_eq!(bytes, vec![0x40, 0x01, 0x12, 0x34]);
        assert_eq!(bytes, hand_pack(1, 0, 0, 0, 1, 0x1234));
    }

    #[test]
    fn piggybacked_content_matches_worked_example() {
        // ACK [0x7d34] 2.05 Content with a 6-byte payload.
        let m = CoapMessage::new(MessageType::Ack, Code::Content, 0x7d34, Token::EMPTY)
            .with_payload_len(6);
        let bytes = encode_header(&m).unwrap();
        assert_eq!(&bytes[..5], &[0x60, 0x45, 0x7d, 0x34, 0xff]);
        assert_eq!(bytes.len(), 11);
        assert_eq!(&bytes[..4], &hand_pack(1, 2, 0, 2, 5, 0x7d34));
    }

    #[test]
    fn observe_registration_encoding() {
        // Observe = 0 is an empty option with delta 6.
        let m = CoapMessage::new(MessageType::Non, Code::Get, 1, Token::from_u32(0xdeadbeef))
            .with_observe(0);
        let b = encode_header(&m).unwrap();
        assert_eq!(
            b,
            vec![0x54, 0x01, 0x00, 0x01, 0xde, 0xad, 0xbe, 0xef, 0x60]
        );
        assert_eq!(decode(&b).unwrap(), m);
    }

    #[test]
    fn max_age_alone_uses_extended_delta() {
        let m = CoapMessage::new(MessageType::Non, Code::Content, 2, Token::EMPTY).with_max_age(60);
        let b = encode_header(&m).unwrap();
        assert_eq!(&b[4..], &[0xd1, 0x01, 60]);
        assert_eq!(decode(&b).unwrap(), m);
    }

    #[test]
    fn nine_byte_token_rejected() {
        assert!(Opaque8::new(&[0u8; 9]).is_err());
        let mut b = hand_pack(1, 1, 9, 0, 1, 7).to_vec();
        b.extend_from_slice(&[0u8; 9]);
        assert!(decode(&b).is_err());
    }

    #[test]
    fn unknown_option_rejected() {
        // Uri-Path (11) is outside the supported set.
        let mut b = hand_pack(1, 0, 0, 0, 1, 7).to_vec();
        b.extend_from_slice(&[0xb1, b'x']);
        assert!(decode(&b).is_err());
    }

    #[test]
    fn malformed_inputs() {
        assert!(decode(&[0x40, 0x01]).is_err());
        assert!(decode(&[0x80, 0x01, 0, 0]).is_err()); // version 2
        assert!(decode(&[0x40, 0x01, 0, 0, 0xff]).is_err()); // empty payload
        assert!(decode(&[0x40, 0x03, 0, 0]).is_err()); // PUT unsupported
    }

    fn arb_opaque(min: usize) -> impl Strategy<Value = Opaque8> {
        prop::collection::vec(any::<u8>(), min..=8).prop_map(|v| Opaque8::new(&v).unwrap())
    }

    prop_compose! {
        fn arb_message()(
            t in 0u8..4,
            code in prop::sample::select(vec![
                Code::Empty, Code::Get, Code::Post, Code::Created, Code::Content, Code::NotFound,
            ]),
            mid in any::<u16>(),
            token in arb_opaque(0),
            observe in prop::option::of(0u32..(1 << 24)),
            max_age in prop::option::of(any::<u32>()),
            etag in prop::option::of(arb_opaque(1)),
            payload_len in 0u16..200,
        ) -> CoapMessage {
            CoapMessage {
                mtype: MessageType::from_bits(t),
                code,
                message_id: mid,
                token,
                options: Options { observe, max_age, etag },
                payload_len,
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip(m in arb_message()) {
            let bytes = encode_header(&m).unwrap();
            prop_assert_eq!(decode(&bytes).unwrap(), m);
        }

        #[test]
        fn decode_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..40)) {
            let _ = decode(&bytes);
        }
    }
}
