pub mod analysis;
pub mod expr;
pub mod quad;
pub mod series;
pub mod star;
pub mod transforms;
