//! The dependent-label type system over transformed programs.

mod check;
pub mod discharge;
pub mod fm;

pub use check::{
    check_cmd, check_program, check_transformed, resolve_env, type_of_expr, CheckOptions, CheckReport, Collected,
    Obligation, ObligationView, ReportView, SideFailure,
};
pub use discharge::{discharge, DischargeConfig, Status, Verdict};
