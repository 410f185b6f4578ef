pub mod canary;
pub mod report;
pub mod simulate;
pub mod theory;
pub mod whitebox;
