//! Deterministic multi-party network simulation.
//!
//! - [`codec`]: canonical field-map encoding shared by every body.
//! - [`envelope`]: actors, channels and the wire envelope.
//! - [`adversary`]: scripted observe / drop / replay / tamper / inject rules.
//! - [`bus`]: the scheduler and the [`World`] trait actors implement.
//! - [`trace`]: run records and their JSON-lines export.
//! - [`leakage`] and [`conformance`]: checks over a finished trace.

pub mod adversary;
pub mod bus;
pub mod codec;
pub mod conformance;
pub mod envelope;
pub mod leakage;
pub mod trace;

pub use adversary::{Action, AdversaryScript, BitFlip, BytePos, InjectSpec, Match, Origin, Rule};
pub use bus::{run_scenario, run_with_budget, Network, SimError, World, DEFAULT_STEP_BUDGET};
pub use conformance::{conformance_check, one_way_template, two_way_template, Conformance, Divergence, Template};
pub use envelope::{ActorId, Channel, ChannelAssumption, Envelope, Header};
pub use leakage::{leakage_scan, Finding, Location, Secret, SecretKind};
pub use trace::{Delivery, ProtocolTrace, TraceEvent, Transition};
