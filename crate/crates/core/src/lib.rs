pub mod charroots;
pub mod coeffs;
pub mod differential;
pub mod error;
pub mod jump;
pub mod linalg;
pub mod quad;
pub mod oracle;
pub mod solution;
pub mod cli;
