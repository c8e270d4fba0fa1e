pub mod diffusion;
pub mod game;
pub mod grid;
pub mod hierarchy;
pub mod lp;
