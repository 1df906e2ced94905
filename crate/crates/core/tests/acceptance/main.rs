//! End-to-end acceptance checks. Each `criterion_*` test prints one
//! PASS/FAIL line; the oracle modules carry their own smaller tests.

mod criteria;
mod dense;
mod exact;
mod sampling;
