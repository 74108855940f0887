#![allow(dead_code)]

pub mod metrics_oracle;
