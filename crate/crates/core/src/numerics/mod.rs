pub mod fd;
pub mod ode;
pub mod quadrature;
