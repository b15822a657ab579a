//! Audio editing engine: a small scripting language for audio edits, the
//! DSP and generative operations it calls, and the machinery that turns
//! natural-language instructions into executed scripts.

pub mod backend;
pub mod dsp;
pub mod eval;
pub mod exec;
pub mod orchestrator;
pub mod script;
