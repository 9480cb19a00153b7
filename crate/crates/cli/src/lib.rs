//! Front end for `leader-core`: file formats, metrics reports and the
//! `leaderctl` commands.

pub mod commands;
pub mod formats;
pub mod report;
