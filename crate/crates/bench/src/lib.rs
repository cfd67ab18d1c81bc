//! Benchmark-only crate; see `benches/pipeline.rs`. The measured paths are
//! the ones the training and evaluation loops spend their time in:
//! contrastive-divergence updates, autoencoding gradients, batched Gibbs
//! generation and the filling-in protocol.
