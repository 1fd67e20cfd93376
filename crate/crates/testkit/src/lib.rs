//! Test-only support: independent optimization oracles and the build-gating
//! property suites. Lives outside the main library so production code never
//! depends on it; shared by the core property tests and the acceptance
//! target.

pub mod gen;
pub mod oracle;
pub mod suites;
