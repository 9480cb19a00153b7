//! Byte-exact message codec.
//!
//! Every frame is a one-byte kind tag followed by the body. Integers are
//! big-endian. Body layouts:
//!
//! | kind                           | body                                   | size |
//! |--------------------------------|----------------------------------------|------|
//! | ELECTION, JOIN                 | node id (0..1), d (2..5), D (6..9)     | 10   |
//! | REPLY_ID, LEAVE, ARRIVAL, DEPART, REQUEST_ID | node id (0..1)           | 2    |
//! | INFORM                         | node id (0..1), centrality (2..5)      | 6    |
//! | control string                 | length (0), ASCII text starting `VCONF`| 1+len|
//!
//! Offsets in [`CodecError`] are frame offsets, so body offset `k` is
//! reported as `k + 1`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use thiserror::Error;

use crate::overlay::{DelayMicros, NodeId};
use crate::ratio::Closeness;

pub const CONTROL_PREFIX: &str = "VCONF";
pub const SUBS: &str = "VCONF:SUBS";
pub const USUBS: &str = "VCONF:USUBS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(u8)]
pub enum MessageKind {
    Election = 0x01,
    Join = 0x02,
    RequestId = 0x03,
    ReplyId = 0x04,
    Leave = 0x05,
    Arrival = 0x06,
    Depart = 0x07,
    Inform = 0x08,
    Control = 0x09,
}

impl MessageKind {
    pub const ALL: [MessageKind; 9] = [
        MessageKind::Election,
        MessageKind::Join,
        MessageKind::RequestId,
        MessageKind::ReplyId,
        MessageKind::Leave,
        MessageKind::Arrival,
        MessageKind::Depart,
        MessageKind::Inform,
        MessageKind::Control,
    ];

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|k| *k as u8 == tag)
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Election => "ELECTION",
            MessageKind::Join => "JOIN",
            MessageKind::RequestId => "REQUEST_ID",
            MessageKind::ReplyId => "REPLY_ID",
            MessageKind::Leave => "LEAVE",
            MessageKind::Arrival => "ARRIVAL",
            MessageKind::Depart => "DEPART",
            MessageKind::Inform => "INFORM",
            MessageKind::Control => "CONTROL",
        }
    }

    /// Body size in bytes, when it is fixed.
    pub fn body_len(self) -> Option<usize> {
        match self {
            MessageKind::Election | MessageKind::Join => Some(10),
            MessageKind::Inform => Some(6),
            MessageKind::Control => None,
            _ => Some(2),
        }
    }
}

/// Centrality as carried by INFORM: unsigned Q16.16 fixed point, per
/// millisecond (the closeness in 1/µs times 1000).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct WireCentrality(pub u32);

impl WireCentrality {
    pub const FRACTION_BITS: u32 = 16;

    /// Floor-rounded and saturating, so the mapping is monotone.
    pub fn from_closeness(c: &Closeness) -> Self {
        if c.is_infinite() {
            return WireCentrality(u32::MAX);
        }
        let scaled = c.numerator() as u128 * 1000 * (1u128 << Self::FRACTION_BITS) / c.denominator() as u128;
        WireCentrality(scaled.min(u32::MAX as u128) as u32)
    }

    pub fn per_ms(self) -> f64 {
        self.0 as f64 / (1u64 << Self::FRACTION_BITS) as f64
    }
}

/// A VCONF-prefixed ASCII control string of at most 255 bytes.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlText(String);

impl ControlText {
    pub fn new(text: &str) -> Result<Self, CodecError> {
        if !text.is_ascii() {
            return Err(CodecError::MalformedControl { offset: 2, reason: "non-ASCII text" });
        }
        if !text.starts_with(CONTROL_PREFIX) {
            return Err(CodecError::MalformedControl { offset: 2, reason: "missing VCONF prefix" });
        }
        if text.len() > u8::MAX as usize {
            return Err(CodecError::FieldOverflow { field: "control text" });
        }
        Ok(ControlText(String::from(text)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ProtocolMessage {
    /// `link_delay` is the point-to-point delay `d` of the link the copy
    /// travels on; `path_delay` is `D`, the sender's best delay from `source`.
    Election {
        source: NodeId,
        link_delay: DelayMicros,
        path_delay: DelayMicros,
    },
    Join {
        node: NodeId,
        link_delay: DelayMicros,
        path_delay: DelayMicros,
    },
    /// Carries the new id handed to a joining node.
    ReplyId {
        new_id: NodeId,
    },
    Leave {
        node: NodeId,
    },
    Arrival {
        node: NodeId,
    },
    Depart {
        node: NodeId,
    },
    Inform {
        candidate: NodeId,
        centrality: WireCentrality,
    },
    RequestId {
        node: NodeId,
    },
    Control(ControlText),
}

impl ProtocolMessage {
    pub fn subs() -> Self {
        ProtocolMessage::Control(ControlText(String::from(SUBS)))
    }

    pub fn usubs() -> Self {
        ProtocolMessage::Control(ControlText(String::from(USUBS)))
    }

    pub fn kind(&self) -> MessageKind {
        match self {
            ProtocolMessage::Election { .. } => MessageKind::Election,
            ProtocolMessage::Join { .. } => MessageKind::Join,
            ProtocolMessage::ReplyId { .. } => MessageKind::ReplyId,
            ProtocolMessage::Leave { .. } => MessageKind::Leave,
            ProtocolMessage::Arrival { .. } => MessageKind::Arrival,
            ProtocolMessage::Depart { .. } => MessageKind::Depart,
            ProtocolMessage::Inform { .. } => MessageKind::Inform,
            ProtocolMessage::RequestId { .. } => MessageKind::RequestId,
            ProtocolMessage::Control(_) => MessageKind::Control,
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::with_capacity(11);
        out.push(self.kind() as u8);
        match self {
            ProtocolMessage::Election { source: id, link_delay, path_delay }
            | ProtocolMessage::Join { node: id, link_delay, path_delay } => {
                out.extend_from_slice(&id.0.to_be_bytes());
                out.extend_from_slice(&delay_field(*link_delay, "d")?.to_be_bytes());
                out.extend_from_slice(&delay_field(*path_delay, "D")?.to_be_bytes());
            }
            ProtocolMessage::ReplyId { new_id: id }
            | ProtocolMessage::Leave { node: id }
            | ProtocolMessage::Arrival { node: id }
            | ProtocolMessage::Depart { node: id }
            | ProtocolMessage::RequestId { node: id } => {
                out.extend_from_slice(&id.0.to_be_bytes());
            }
            ProtocolMessage::Inform { candidate, centrality } => {
                out.extend_from_slice(&candidate.0.to_be_bytes());
                out.extend_from_slice(&centrality.0.to_be_bytes());
            }
            ProtocolMessage::Control(text) => {
                let bytes = text.0.as_bytes();
                let len = u8::try_from(bytes.len()).map_err(|_| CodecError::FieldOverflow { field: "control text" })?;
                out.push(len);
                out.extend_from_slice(bytes);
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let (&tag, body) = bytes.split_first().ok_or(CodecError::Truncated { offset: 0, needed: 1 })?;
        let kind = MessageKind::from_tag(tag).ok_or(CodecError::UnknownTag { offset: 0, tag })?;
        if let Some(len) = kind.body_len() {
            if body.len() < len {
                return Err(CodecError::Truncated { offset: 1 + body.len(), needed: 1 + len });
            }
            if body.len() > len {
                return Err(CodecError::TrailingBytes { offset: 1 + len });
            }
        }
        let id = |b: &[u8]| NodeId(u16::from_be_bytes([b[0], b[1]]));
        let word = |b: &[u8], at: usize| u32::from_be_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]]);
        let msg = match kind {
            MessageKind::Election => ProtocolMessage::Election {
                source: id(body),
                link_delay: DelayMicros(word(body, 2).into()),
                path_delay: DelayMicros(word(body, 6).into()),
            },
            MessageKind::Join => ProtocolMessage::Join {
                node: id(body),
                link_delay: DelayMicros(word(body, 2).into()),
                path_delay: DelayMicros(word(body, 6).into()),
            },
            MessageKind::ReplyId => ProtocolMessage::ReplyId { new_id: id(body) },
            MessageKind::Leave => ProtocolMessage::Leave { node: id(body) },
            MessageKind::Arrival => ProtocolMessage::Arrival { node: id(body) },
            MessageKind::Depart => ProtocolMessage::Depart { node: id(body) },
            MessageKind::RequestId => ProtocolMessage::RequestId { node: id(body) },
            MessageKind::Inform => {
                ProtocolMessage::Inform { candidate: id(body), centrality: WireCentrality(word(body, 2)) }
            }
            MessageKind::Control => {
                let (&len, text) = body.split_first().ok_or(CodecError::Truncated { offset: 1, needed: 2 })?;
                let len = len as usize;
                if text.len() < len {
                    return Err(CodecError::Truncated { offset: 2 + text.len(), needed: 2 + len });
                }
                if text.len() > len {
                    return Err(CodecError::TrailingBytes { offset: 2 + len });
                }
                if let Some(pos) = text.iter().position(|b| !b.is_ascii()) {
                    return Err(CodecError::MalformedControl { offset: 2 + pos, reason: "non-ASCII text" });
                }
                if !text.starts_with(CONTROL_PREFIX.as_bytes()) {
                    return Err(CodecError::MalformedControl { offset: 2, reason: "missing VCONF prefix" });
                }
                // checked ASCII above
                let s = core::str::from_utf8(text).expect("ascii is utf-8");
                ProtocolMessage::Control(ControlText(String::from(s)))
            }
        };
        Ok(msg)
    }

    /// `Some(true)` for SUBS, `Some(false)` for USUBS.
    pub fn subscription(&self) -> Option<bool> {
        match self {
            ProtocolMessage::Control(t) if t.as_str() == SUBS => Some(true),
            ProtocolMessage::Control(t) if t.as_str() == USUBS => Some(false),
            _ => None,
        }
    }
}

impl fmt::Display for ProtocolMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolMessage::Election { source, link_delay, path_delay } => {
                write!(f, "ELECTION({source}, d={}, D={})", link_delay.0, path_delay.0)
            }
            ProtocolMessage::Join { node, link_delay, path_delay } => {
                write!(f, "JOIN({node}, d={}, D={})", link_delay.0, path_delay.0)
            }
            ProtocolMessage::ReplyId { new_id } => write!(f, "REPLY_ID({new_id})"),
            ProtocolMessage::Leave { node } => write!(f, "LEAVE({node})"),
            ProtocolMessage::Arrival { node } => write!(f, "ARRIVAL({node})"),
            ProtocolMessage::Depart { node } => write!(f, "DEPART({node})"),
            ProtocolMessage::Inform { candidate, centrality } => {
                write!(f, "INFORM({candidate}, C={:#010x})", centrality.0)
            }
            ProtocolMessage::RequestId { node } => write!(f, "REQUEST_ID({node})"),
            ProtocolMessage::Control(t) => write!(f, "{}", t.as_str()),
        }
    }
}

fn delay_field(d: DelayMicros, field: &'static str) -> Result<u32, CodecError> {
    u32::try_from(d.0).map_err(|_| CodecError::FieldOverflow { field })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("field `{field}` does not fit its wire width")]
    FieldOverflow { field: &'static str },
    #[error("frame truncated at offset {offset}: need {needed} bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("unknown message tag {tag:#04x} at offset {offset}")]
    UnknownTag { offset: usize, tag: u8 },
    #[error("unexpected trailing bytes from offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("malformed control string at offset {offset}: {reason}")]
    MalformedControl { offset: usize, reason: &'static str },
}

/// A random message of `kind` with every field drawn over its full wire
/// range. Control strings are `VCONF` plus up to 250 random ASCII bytes.
pub fn sample_message<R: Rng + ?Sized>(kind: MessageKind, rng: &mut R) -> ProtocolMessage {
    let node = NodeId(rng.random());
    match kind {
        MessageKind::Election => ProtocolMessage::Election {
            source: node,
            link_delay: DelayMicros(rng.random::<u32>().into()),
            path_delay: DelayMicros(rng.random::<u32>().into()),
        },
        MessageKind::Join => ProtocolMessage::Join {
            node,
            link_delay: DelayMicros(rng.random::<u32>().into()),
            path_delay: DelayMicros(rng.random::<u32>().into()),
        },
        MessageKind::RequestId => ProtocolMessage::RequestId { node },
        MessageKind::ReplyId => ProtocolMessage::ReplyId { new_id: node },
        MessageKind::Leave => ProtocolMessage::Leave { node },
        MessageKind::Arrival => ProtocolMessage::Arrival { node },
        MessageKind::Depart => ProtocolMessage::Depart { node },
        MessageKind::Inform => ProtocolMessage::Inform { candidate: node, centrality: WireCentrality(rng.random()) },
        MessageKind::Control => {
            let len = rng.random_range(0..=u8::MAX as usize - CONTROL_PREFIX.len());
            let mut text = String::from(CONTROL_PREFIX);
            text.extend((0..len).map(|_| char::from(rng.random_range(0u8..=0x7f))));
            ProtocolMessage::Control(ControlText(text))
        }
    }
}
