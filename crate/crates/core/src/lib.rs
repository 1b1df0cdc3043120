//! # ticpay
//!
//! A protocol engine for multi-factor wireless payment authentication, plus a
//! deterministic discrete-event simulator that runs the whole multi-party flow
//! under a scripted network adversary.
//!
//! The protocol combines three factors:
//!
//! - a web username/password login that yields a per-session secret key,
//!   transported to the handset wrapped under the customer's 64-bit PIN;
//! - a single-use Transaction Identification Code (TIC), picked from a
//!   password-protected vault on the handset. The TIC keys the encryption of
//!   the payment order and is itself encrypted under the session key;
//! - an out-of-band SMS confirmation. Nothing commits until the customer
//!   answers YES before the deadline.
//!
//! The two-way extension authenticates the merchant to the customer through
//! both banks before any payment data moves, and settles the payment bank to
//! bank so that the merchant never sees customer account data.
//!
//! Module map:
//!
//! | module | role |
//! |--------|------|
//! | [`tic_registry`] | bank-side TIC issuance, single-use matching, expiry |
//! | [`crypto`] | session keys, PIN wrapping, TIC-keyed and session-keyed encryption |
//! | [`auth_server`] | customer bank authentication state machine |
//! | [`client_agent`] | handset vault and customer agent state machine |
//! | [`two_way`] | merchant certificates, merchant verification, settlement |
//! | [`netsim`] | message bus, adversary hooks, traces, leakage and conformance checks |
//! | [`actors`] | glue that drives the state machines from delivered envelopes |
//! | [`scenario`] | scenario files, bundled scenarios, run reports |

pub mod actors;
pub mod auth_server;
pub mod client_agent;
pub mod crypto;
pub mod digest;
pub mod messages;
pub mod netsim;
pub mod order;
pub mod scenario;
pub mod tic_registry;
pub mod two_way;

/// Integer simulation seconds. Every deadline and expiry refers to this clock.
pub type SimTime = u64;

pub use auth_server::{AuthServer, ServerConfig};
pub use client_agent::{ClientAgent, Vault};
pub use netsim::{run_scenario, AdversaryScript, Envelope, ProtocolTrace};
pub use crypto::{HybridCrypto, Pin, SecretKey};
pub use order::{PaymentMode, PaymentOrder};
pub use tic_registry::{TicCode, TicPolicy, TicRegistry};
