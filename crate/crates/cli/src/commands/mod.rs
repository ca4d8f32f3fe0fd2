pub mod example23;
pub mod needles;
pub mod selftest;
pub mod sweep;
pub mod verify;
