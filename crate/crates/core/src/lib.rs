pub mod attitude;
pub mod content;
pub mod engine;
pub mod eval;
pub mod exec;
pub mod llm;
pub mod memory;
pub mod persona;
pub mod recommend;
pub mod rng;
pub mod socialnet;
