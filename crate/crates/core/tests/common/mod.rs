#![allow(dead_code)]

pub mod strategies;
pub mod suites;
