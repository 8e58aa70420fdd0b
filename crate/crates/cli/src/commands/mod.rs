pub mod calibrate;
pub mod color;
pub mod compose;
pub mod face;
pub mod fixtures;
pub mod transfer;
