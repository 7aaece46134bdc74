//! Protocol B (rounds and Bell test) and Protocol A (full key distribution)
//! over an authenticated public channel.

mod messages;
mod params;
mod session;

pub use messages::{
    disclosed_bits, frame, unframe, Channel, Message, Observer, PaBackend, ParityRange, Party, PublicMessage,
};
pub use params::ProtocolParams;
pub use session::{
    recompute_eta_observed, run_protocol_a, run_protocol_b, select_bell_rounds, AbortReason, SessionResult,
};
