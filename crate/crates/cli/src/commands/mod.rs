pub mod benchmark;
pub mod classify;
pub mod fit;
pub mod pathology;

/// Whether every requested cell or replication produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Complete,
    Partial(usize),
}

impl Status {
    pub fn from_failures(failed: usize) -> Status {
        if failed == 0 {
            Status::Complete
        } else {
            Status::Partial(failed)
        }
    }
}
