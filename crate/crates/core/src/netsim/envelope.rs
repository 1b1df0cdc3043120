use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::codec::{CodecError, FieldMap};
use crate::messages::{Message, MsgType};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActorId {
    /// The customer bank.
    Bank,
    Client(String),
    /// A customer's handset on the SMS network, addressed by cell number.
    Handset(String),
    MerchantBank,
    Merchant,
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActorId::Bank => f.write_str("bank"),
            ActorId::Client(name) => write!(f, "client:{name}"),
            ActorId::Handset(cell) => write!(f, "handset:{cell}"),
            ActorId::MerchantBank => f.write_str("merchant-bank"),
            ActorId::Merchant => f.write_str("merchant"),
        }
    }
}

impl FromStr for ActorId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bank" => return Ok(ActorId::Bank),
            "merchant-bank" => return Ok(ActorId::MerchantBank),
            "merchant" => return Ok(ActorId::Merchant),
            _ => {}
        }
        match s.split_once(':') {
            Some(("client", name)) if !name.is_empty() => Ok(ActorId::Client(name.to_string())),
            Some(("handset", cell)) if !cell.is_empty() => Ok(ActorId::Handset(cell.to_string())),
            _ => Err(format!("unknown actor {s:?}")),
        }
    }
}

impl TryFrom<String> for ActorId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ActorId> for String {
    fn from(a: ActorId) -> Self {
        a.to_string()
    }
}

/// What the protocol is entitled to assume about a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelAssumption {
    Untrusted,
    /// The protocol relies on the carrier's link encryption here.
    AssumedEncrypted,
    /// Trusted for integrity by assumption, but visible to the simulator's adversary.
    TrustedObservable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Channel {
    Web,
    Sms,
    InterBank,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Web, Channel::Sms, Channel::InterBank];

    pub fn assumption(self) -> ChannelAssumption {
        match self {
            Channel::Web => ChannelAssumption::Untrusted,
            Channel::Sms => ChannelAssumption::AssumedEncrypted,
            Channel::InterBank => ChannelAssumption::TrustedObservable,
        }
    }

    pub fn latency(self) -> u64 {
        match self {
            Channel::Web => 1,
            Channel::Sms => 3,
            Channel::InterBank => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Channel::Web => 1,
            Channel::Sms => 2,
            Channel::InterBank => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Web => "web",
            Channel::Sms => "sms",
            Channel::InterBank => "inter-bank",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Header {
    pub msg_type: MsgType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cookie: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Envelope {
    pub sender: ActorId,
    pub receiver: ActorId,
    pub channel: Channel,
    pub header: Header,
    pub body: Vec<u8>,
}

mod tag {
    pub const SENDER: u16 = 1;
    pub const RECEIVER: u16 = 2;
    pub const CHANNEL: u16 = 3;
    pub const MSG_TYPE: u16 = 4;
    pub const COOKIE: u16 = 5;
    pub const REQUEST: u16 = 6;
    pub const BODY: u16 = 7;
}

impl Envelope {
    pub fn new<M: Message>(
        sender: ActorId,
        receiver: ActorId,
        channel: Channel,
        cookie: Option<&str>,
        request_id: Option<&str>,
        msg: &M,
    ) -> Self {
        Self {
            sender,
            receiver,
            channel,
            header: Header {
                msg_type: M::TYPE,
                cookie: cookie.map(str::to_string),
                request_id: request_id.map(str::to_string),
            },
            body: msg.encode(),
        }
    }

    pub fn msg_type(&self) -> MsgType {
        self.header.msg_type
    }

    pub fn request_id(&self) -> Option<&str> {
        self.header.request_id.as_deref()
    }

    pub fn cookie(&self) -> Option<&str> {
        self.header.cookie.as_deref()
    }

    pub fn decode<M: Message>(&self) -> Result<M, CodecError> {
        M::decode(&self.body)
    }

    /// Canonical serialization of the whole envelope.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut m = FieldMap::new();
        m.put_str(tag::SENDER, &self.sender.to_string())
            .put_str(tag::RECEIVER, &self.receiver.to_string())
            .put_u8(tag::CHANNEL, self.channel.code())
            .put_u8(tag::MSG_TYPE, self.header.msg_type.code())
            .put_opt_str(tag::COOKIE, self.header.cookie.as_deref())
            .put_opt_str(tag::REQUEST, self.header.request_id.as_deref())
            .put(tag::BODY, self.body.clone());
        m.encode()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let m = FieldMap::decode(bytes)?;
        m.expect_only(&[
            tag::SENDER,
            tag::RECEIVER,
            tag::CHANNEL,
            tag::MSG_TYPE,
            tag::COOKIE,
            tag::REQUEST,
            tag::BODY,
        ])?;
        let actor = |t| -> Result<ActorId, CodecError> { m.str(t)?.parse().map_err(|_| CodecError::InvalidValue(t)) };
        Ok(Self {
            sender: actor(tag::SENDER)?,
            receiver: actor(tag::RECEIVER)?,
            channel: Channel::from_code(m.u8(tag::CHANNEL)?).ok_or(CodecError::InvalidValue(tag::CHANNEL))?,
            header: Header {
                msg_type: MsgType::from_code(m.u8(tag::MSG_TYPE)?).ok_or(CodecError::InvalidValue(tag::MSG_TYPE))?,
                cookie: m.opt_str(tag::COOKIE)?.map(str::to_string),
                request_id: m.opt_str(tag::REQUEST)?.map(str::to_string),
            },
            body: m.bytes(tag::BODY)?.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messages::SmsReply;

    #[test]
    fn actor_ids_parse_back() {
        for a in [
            ActorId::Bank,
            ActorId::Client("alice".into()),
            ActorId::Handset("+4790000001".into()),
            ActorId::MerchantBank,
            ActorId::Merchant,
        ] {
            assert_eq!(a.to_string().parse::<ActorId>().unwrap(), a);
        }
        assert!("client:".parse::<ActorId>().is_err());
        assert!("teller".parse::<ActorId>().is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let e = Envelope::new(
            ActorId::Handset("+4790000001".into()),
            ActorId::Bank,
            Channel::Sms,
            None,
            Some("alice-1"),
            &SmsReply {
                txn_id: "T1".into(),
                decision: "YES".into(),
            },
        );
        let bytes = e.to_bytes();
        assert_eq!(Envelope::from_bytes(&bytes).unwrap(), e);
        assert_eq!(e.decode::<SmsReply>().unwrap().txn_id, "T1");
    }

    #[test]
    fn channel_assumptions() {
        assert_eq!(Channel::Web.assumption(), ChannelAssumption::Untrusted);
        assert_eq!(Channel::Sms.assumption(), ChannelAssumption::AssumedEncrypted);
        assert_eq!(Channel::InterBank.assumption(), ChannelAssumption::TrustedObservable);
    }
}
