pub mod calibrate;
pub mod diagnose;
pub mod noise;
pub mod pipeline;
pub mod score;
pub mod validate;
