pub mod lindblad;
