pub mod durability;
pub mod grammar_gen;
pub mod grammar_oracle;
pub mod vad_oracle;
