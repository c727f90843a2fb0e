//! Length-prefixed frame codec.
//!
//! ```text
//! +------+------+------+------+---------+------+-----------+-----------------+
//! | 0x44 | 0x53 | 0x4B | 0x45 | version | type | len (u16 BE)| payload (len) |
//! +------+------+------+------+---------+------+-----------+-----------------+
//! ```
//!
//! Payloads by type: `Hello` is an 8-byte big-endian nonce followed by the key
//! length byte; `Labels` and `Confirm` are the ASCII bytes of the labels back to
//! back; `Error` is one code byte.

use std::fmt;

use thiserror::Error;

use crate::sbox::Label;

pub const MAGIC: [u8; 4] = *b"DSKE";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;
pub const HELLO_PAYLOAD_LEN: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("payload of {0} bytes exceeds the 65535-byte limit")]
    PayloadTooLarge(usize),
    #[error("payload does not match the shape of a {0:?} frame")]
    MalformedPayload(FrameType),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("unknown frame type {0:#04x}")]
    UnknownType(u8),
    #[error("truncated frame: need {needed} more bytes")]
    Truncated { needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum FrameType {
    Hello = 0x01,
    Labels = 0x02,
    Confirm = 0x03,
    Error = 0x04,
}

impl TryFrom<u8> for FrameType {
    type Error = WireError;

    fn try_from(b: u8) -> Result<Self, WireError> {
        Ok(match b {
            0x01 => FrameType::Hello,
            0x02 => FrameType::Labels,
            0x03 => FrameType::Confirm,
            0x04 => FrameType::Error,
            other => return Err(WireError::UnknownType(other)),
        })
    }
}

/// Code carried by an `Error` frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ErrorCode(pub u8);

impl ErrorCode {
    pub const LABEL_NOT_IN_WINDOW: ErrorCode = ErrorCode(0x01);
    pub const CONFIRM_MISMATCH: ErrorCode = ErrorCode(0x02);
    pub const UNEXPECTED_FRAME: ErrorCode = ErrorCode(0x03);
    pub const BAD_KEY_LENGTH: ErrorCode = ErrorCode(0x04);
    pub const NO_WINDOW: ErrorCode = ErrorCode(0x05);
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match *self {
            ErrorCode::LABEL_NOT_IN_WINDOW => "label not in window",
            ErrorCode::CONFIRM_MISMATCH => "confirmation mismatch",
            ErrorCode::UNEXPECTED_FRAME => "unexpected frame",
            ErrorCode::BAD_KEY_LENGTH => "bad key length",
            ErrorCode::NO_WINDOW => "no duplicate-free window",
            _ => "unknown",
        };
        write!(f, "{name} ({:#04x})", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireFrame {
    kind: FrameType,
    payload: Vec<u8>,
}

impl WireFrame {
    /// A frame with an arbitrary payload. Shape is checked by [`encode_frame`].
    pub fn from_parts(kind: FrameType, payload: Vec<u8>) -> Self {
        Self { kind, payload }
    }

    pub fn hello(nonce: u64, key_len: u8) -> Self {
        let mut payload = nonce.to_be_bytes().to_vec();
        payload.push(key_len);
        Self::from_parts(FrameType::Hello, payload)
    }

    pub fn labels(labels: &[Label]) -> Self {
        Self::from_parts(FrameType::Labels, label_bytes(labels))
    }

    pub fn confirm(labels: &[Label]) -> Self {
        Self::from_parts(FrameType::Confirm, label_bytes(labels))
    }

    pub fn error(code: ErrorCode) -> Self {
        Self::from_parts(FrameType::Error, vec![code.0])
    }

    pub fn kind(&self) -> FrameType {
        self.kind
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// `(nonce, key_len)` of a well-formed `Hello`.
    pub fn as_hello(&self) -> Option<(u64, u8)> {
        if self.kind != FrameType::Hello || self.payload.len() != HELLO_PAYLOAD_LEN {
            return None;
        }
        let nonce = u64::from_be_bytes(self.payload[..8].try_into().unwrap());
        Some((nonce, self.payload[8]))
    }

    /// Labels of a well-formed `Labels` or `Confirm` frame.
    pub fn as_labels(&self) -> Option<Vec<Label>> {
        if !matches!(self.kind, FrameType::Labels | FrameType::Confirm) {
            return None;
        }
        parse_labels(&self.payload)
    }

    pub fn as_error(&self) -> Option<ErrorCode> {
        match (self.kind, self.payload.as_slice()) {
            (FrameType::Error, &[code]) => Some(ErrorCode(code)),
            _ => None,
        }
    }

    fn check_shape(&self) -> Result<(), WireError> {
        let ok = match self.kind {
            FrameType::Hello => self.payload.len() == HELLO_PAYLOAD_LEN,
            FrameType::Labels | FrameType::Confirm => parse_labels(&self.payload).is_some(),
            FrameType::Error => self.payload.len() == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(WireError::MalformedPayload(self.kind))
        }
    }
}

fn label_bytes(labels: &[Label]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.as_bytes()).collect()
}

fn parse_labels(payload: &[u8]) -> Option<Vec<Label>> {
    if !payload.len().is_multiple_of(2) {
        return None;
    }
    payload
        .chunks_exact(2)
        .map(|c| Label::from_bytes([c[0], c[1]]))
        .collect()
}

/// Serializes the envelope without checking that the payload fits the type.
pub fn encode_envelope(frame: &WireFrame) -> Result<Vec<u8>, WireError> {
    let len = frame.payload.len();
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.kind as u8);
    out.extend_from_slice(&(len as u16).to_be_bytes());
    out.extend_from_slice(&frame.payload);
    Ok(out)
}

/// Parses a header, returning the frame type and payload length.
///
/// Fails fast on a bad prefix even when fewer than `HEADER_LEN` bytes are
/// available, so a stream that can never become valid is rejected early.
pub fn decode_header(bytes: &[u8]) -> Result<(FrameType, usize), WireError> {
    let avail = bytes.len().min(MAGIC.len());
    if bytes[..avail] != MAGIC[..avail] {
        return Err(WireError::BadMagic);
    }
    if let Some(&v) = bytes.get(4) {
        if v != VERSION {
            return Err(WireError::UnsupportedVersion(v));
        }
    }
    let kind = bytes.get(5).map(|&b| FrameType::try_from(b)).transpose()?;
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN - bytes.len(),
        });
    }
    let len = u16::from_be_bytes([bytes[6], bytes[7]]) as usize;
    Ok((kind.expect("header complete"), len))
}

/// Parses one envelope and returns it with the unconsumed suffix, without
/// checking payload shape.
pub fn decode_envelope(bytes: &[u8]) -> Result<(WireFrame, &[u8]), WireError> {
    let (kind, len) = decode_header(bytes)?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < len {
        return Err(WireError::Truncated {
            needed: len - body.len(),
        });
    }
    let (payload, rest) = body.split_at(len);
    Ok((WireFrame::from_parts(kind, payload.to_vec()), rest))
}

pub fn encode_frame(frame: &WireFrame) -> Result<Vec<u8>, WireError> {
    if frame.payload.len() > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(frame.payload.len()));
    }
    frame.check_shape()?;
    encode_envelope(frame)
}

pub fn decode_frame(bytes: &[u8]) -> Result<(WireFrame, &[u8]), WireError> {
    let (frame, rest) = decode_envelope(bytes)?;
    frame.check_shape()?;
    Ok((frame, rest))
}

/// Reassembles frames from a byte stream delivered in arbitrary pieces.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// The next complete frame, or `None` until more bytes arrive.
    pub fn next_frame(&mut self) -> Result<Option<WireFrame>, WireError> {
        match decode_frame(&self.buf) {
            Ok((frame, rest)) => {
                let consumed = self.buf.len() - rest.len();
                self.buf.drain(..consumed);
                Ok(Some(frame))
            }
            Err(WireError::Truncated { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }
}

/// The frames of one session in wire order: all an eavesdropper sees.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionTranscript {
    pub frames: Vec<WireFrame>,
}

impl SessionTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: WireFrame) {
        self.frames.push(frame);
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        for f in &self.frames {
            out.extend(encode_frame(f)?);
        }
        Ok(out)
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self, WireError> {
        let mut frames = Vec::new();
        while !bytes.is_empty() {
            let (f, rest) = decode_frame(bytes)?;
            frames.push(f);
            bytes = rest;
        }
        Ok(Self { frames })
    }

    fn first(&self, kind: FrameType) -> Option<&WireFrame> {
        self.frames.iter().find(|f| f.kind == kind)
    }

    pub fn hello(&self) -> Option<(u64, u8)> {
        self.first(FrameType::Hello)?.as_hello()
    }

    pub fn labels(&self) -> Option<Vec<Label>> {
        self.first(FrameType::Labels)?.as_labels()
    }

    pub fn confirm(&self) -> Option<Vec<Label>> {
        self.first(FrameType::Confirm)?.as_labels()
    }
}

/// A payload byte that is neither structure, nonce, key length, nor part of a
/// public-box label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadLeak {
    pub frame: usize,
    pub offset: usize,
    pub byte: u8,
}

/// Checks that every payload byte of the transcript is a nonce byte, the key
/// length byte, an error code, or a byte of a valid public-box label.
pub fn audit_transcript(t: &SessionTranscript) -> Vec<PayloadLeak> {
    let mut leaks = Vec::new();
    for (i, f) in t.frames.iter().enumerate() {
        match f.kind {
            FrameType::Hello if f.payload.len() == HELLO_PAYLOAD_LEN => {}
            FrameType::Error if f.payload.len() == 1 => {}
            FrameType::Labels | FrameType::Confirm if f.payload.len() % 2 == 0 => {
                for (j, pair) in f.payload.chunks_exact(2).enumerate() {
                    let valid =
                        Label::from_bytes([pair[0], pair[1]]).is_some_and(|l| l.is_s2_label());
                    if !valid {
                        leaks.extend(pair.iter().enumerate().map(|(o, &byte)| PayloadLeak {
                            frame: i,
                            offset: 2 * j + o,
                            byte,
                        }));
                    }
                }
            }
            _ => leaks.extend(
                f.payload
                    .iter()
                    .enumerate()
                    .map(|(offset, &byte)| PayloadLeak {
                        frame: i,
                        offset,
                        byte,
                    }),
            ),
        }
    }
    leaks
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(ls: &[&str]) -> Vec<Label> {
        ls.iter().map(|s| s.parse().unwrap()).collect()
    }

    #[test]
    fn hello_vector() {
        let bytes = encode_frame(&WireFrame::hello(0, 8)).unwrap();
        assert_eq!(
            bytes,
            [0x44, 0x53, 0x4B, 0x45, 0x01, 0x01, 0x00, 0x09, 0, 0, 0, 0, 0, 0, 0, 0, 0x08]
        );
    }

    #[test]
    fn labels_vector() {
        let bytes = encode_frame(&WireFrame::labels(&labels(&["3b", "4c"]))).unwrap();
        assert_eq!(
            bytes,
            [0x44, 0x53, 0x4B, 0x45, 0x01, 0x02, 0x00, 0x04, 0x33, 0x62, 0x34, 0x63]
        );
    }

    #[test]
    fn error_vector() {
        let bytes = encode_frame(&WireFrame::error(ErrorCode(1))).unwrap();
        assert_eq!(
            bytes,
            [0x44, 0x53, 0x4B, 0x45, 0x01, 0x04, 0x00, 0x01, 0x01]
        );
    }

    #[test]
    fn decode_errors() {
        assert_eq!(decode_frame(&[0; 17]).unwrap_err(), WireError::BadMagic);
        assert_eq!(decode_frame(b"DSX").unwrap_err(), WireError::BadMagic);
        assert_eq!(
            decode_frame(b"DSKE\x02\x01\x00\x00").unwrap_err(),
            WireError::UnsupportedVersion(2)
        );
        assert_eq!(
            decode_frame(b"DSKE\x01\x09\x00\x00").unwrap_err(),
            WireError::UnknownType(9)
        );
        assert_eq!(
            decode_frame(b"DSKE\x01\x01\x00\x09\x00\x00\x00\x00").unwrap_err(),
            WireError::Truncated { needed: 5 }
        );
        assert_eq!(
            decode_frame(b"DS").unwrap_err(),
            WireError::Truncated { needed: 6 }
        );
        assert_eq!(
            decode_frame(b"").unwrap_err(),
            WireError::Truncated { needed: 8 }
        );
        assert_eq!(
            decode_frame(b"DSKE\x01\x01\x00\x01\x00").unwrap_err(),
            WireError::MalformedPayload(FrameType::Hello)
        );
        assert_eq!(
            decode_frame(b"DSKE\x01\x02\x00\x03abc").unwrap_err(),
            WireError::MalformedPayload(FrameType::Labels)
        );
        assert_eq!(
            decode_frame(b"DSKE\x01\x03\x00\x02a\x00").unwrap_err(),
            WireError::MalformedPayload(FrameType::Confirm)
        );
    }

    #[test]
    fn decode_leaves_suffix() {
        let mut bytes = encode_frame(&WireFrame::error(ErrorCode(2))).unwrap();
        bytes.extend_from_slice(b"DSK");
        let (f, rest) = decode_frame(&bytes).unwrap();
        assert_eq!(f.as_error(), Some(ErrorCode(2)));
        assert_eq!(rest, b"DSK");
    }

    #[test]
    fn encode_rejects() {
        let big = WireFrame::from_parts(FrameType::Labels, vec![b'a'; MAX_PAYLOAD + 1]);
        assert_eq!(
            encode_frame(&big).unwrap_err(),
            WireError::PayloadTooLarge(MAX_PAYLOAD + 1)
        );
        assert_eq!(
            encode_envelope(&big).unwrap_err(),
            WireError::PayloadTooLarge(MAX_PAYLOAD + 1)
        );
        let bad = WireFrame::from_parts(FrameType::Error, vec![]);
        assert_eq!(
            encode_frame(&bad).unwrap_err(),
            WireError::MalformedPayload(FrameType::Error)
        );
        // The envelope layer carries any payload up to the limit.
        let max = WireFrame::from_parts(FrameType::Error, vec![7; MAX_PAYLOAD]);
        let bytes = encode_envelope(&max).unwrap();
        assert_eq!(&bytes[6..8], &[0xFF, 0xFF]);
        assert_eq!(decode_envelope(&bytes).unwrap().0, max);
    }

    #[test]
    fn accessors() {
        let hello = WireFrame::hello(0x0102_0304_0506_0708, 12);
        assert_eq!(hello.as_hello(), Some((0x0102_0304_0506_0708, 12)));
        assert_eq!(hello.as_labels(), None);
        let c = WireFrame::confirm(&labels(&["4c", "3b"]));
        assert_eq!(c.as_labels(), Some(labels(&["4c", "3b"])));
        assert_eq!(c.as_error(), None);
    }

    #[test]
    fn decoder_handles_byte_at_a_time() {
        let frames = vec![
            WireFrame::hello(7, 2),
            WireFrame::labels(&labels(&["1a", "bf"])),
            WireFrame::confirm(&labels(&["bf", "1a"])),
        ];
        let t = SessionTranscript {
            frames: frames.clone(),
        };
        let bytes = t.to_bytes().unwrap();
        let mut dec = FrameDecoder::new();
        let mut out = Vec::new();
        for b in &bytes {
            dec.push(std::slice::from_ref(b));
            while let Some(f) = dec.next_frame().unwrap() {
                out.push(f);
            }
        }
        assert_eq!(out, frames);
        assert_eq!(dec.buffered(), 0);
        assert_eq!(SessionTranscript::from_bytes(&bytes).unwrap(), t);
        assert_eq!(t.hello(), Some((7, 2)));
        assert_eq!(t.confirm(), Some(labels(&["bf", "1a"])));
    }

    #[test]
    fn audit_flags_non_label_bytes() {
        let clean = SessionTranscript {
            frames: vec![
                WireFrame::hello(99, 1),
                WireFrame::labels(&labels(&["3b"])),
                WireFrame::confirm(&labels(&["3b"])),
            ],
        };
        assert!(audit_transcript(&clean).is_empty());
        let dirty = SessionTranscript {
            frames: vec![
                WireFrame::labels(&labels(&["zz", "3b"])),
                WireFrame::from_parts(FrameType::Labels, vec![0, 0, 0, 17]),
            ],
        };
        let leaks = audit_transcript(&dirty);
        assert_eq!(leaks.len(), 6);
        assert_eq!(
            leaks[0],
            PayloadLeak {
                frame: 0,
                offset: 0,
                byte: b'z'
            }
        );
        assert_eq!(
            leaks[5],
            PayloadLeak {
                frame: 1,
                offset: 3,
                byte: 17
            }
        );
    }
}
