//! Wire format and network endpoints.

mod endpoint;
mod frame;

pub use endpoint::{
    initiate, read_frame, respond, run_initiator, run_responder, write_frame, HandshakeError,
    HandshakeOutcome, Responder, DEFAULT_PORT, IO_TIMEOUT,
};
pub use frame::{
    audit_transcript, decode_envelope, decode_frame, decode_header, encode_envelope, encode_frame,
    ErrorCode, FrameDecoder, FrameType, PayloadLeak, SessionTranscript, WireError, WireFrame,
    HEADER_LEN, HELLO_PAYLOAD_LEN, MAGIC, MAX_PAYLOAD, VERSION,
};
