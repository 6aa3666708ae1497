pub mod eigensolver;
pub mod functionals;
pub mod modulation;
pub mod ode;
pub mod profiles;
pub mod quad;
pub mod specfun;
