use std::fmt::Display;
use std::io::{BufWriter, Write};
use std::path::Path;

use ratio_cpd::CpdError;
use tempfile::NamedTempFile;

/// Process exit status by failure class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Usage = 2,
    Data = 3,
    Runtime = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Self {
            exit,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl Display) -> Self {
        Self::new(Exit::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl Display) -> Self {
        Self::new(Exit::Data, anyhow::anyhow!("{msg}"))
    }
}

pub type CliResult<T> = Result<T, Failure>;

fn exit_for(e: &CpdError) -> Exit {
    match e {
        CpdError::InvalidArgument(_) => Exit::Usage,
        e if e.is_data_error() => Exit::Data,
        _ => Exit::Runtime,
    }
}

pub trait Classify<T> {
    /// Library errors, classified by kind.
    fn cpd(self, context: impl Display) -> CliResult<T>;
    /// Any failure while reading user-supplied input.
    fn input(self, context: impl Display) -> CliResult<T>;
    fn runtime(self, context: impl Display) -> CliResult<T>;
}

impl<T> Classify<T> for Result<T, CpdError> {
    fn cpd(self, context: impl Display) -> CliResult<T> {
        self.map_err(|e| {
            let exit = exit_for(&e);
            Failure::new(exit, anyhow::Error::new(e).context(context.to_string()))
        })
    }

    fn input(self, context: impl Display) -> CliResult<T> {
        self.map_err(|e| {
            let exit = match exit_for(&e) {
                Exit::Runtime => Exit::Data,
                other => other,
            };
            Failure::new(exit, anyhow::Error::new(e).context(context.to_string()))
        })
    }

    fn runtime(self, context: impl Display) -> CliResult<T> {
        self.map_err(|e| Failure::new(Exit::Runtime, anyhow::Error::new(e).context(context.to_string())))
    }
}

impl<T> Classify<T> for std::io::Result<T> {
    fn cpd(self, context: impl Display) -> CliResult<T> {
        self.runtime(context)
    }

    fn input(self, context: impl Display) -> CliResult<T> {
        self.map_err(|e| Failure::new(Exit::Data, anyhow::Error::new(e).context(context.to_string())))
    }

    fn runtime(self, context: impl Display) -> CliResult<T> {
        self.map_err(|e| Failure::new(Exit::Runtime, anyhow::Error::new(e).context(context.to_string())))
    }
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never observe a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    let ctx = || format!("cannot write {}", path.display());
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir).runtime(ctx())?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w).runtime(ctx())?;
        w.flush().runtime(ctx())?;
    }
    tmp.as_file().sync_all().runtime(ctx())?;
    tmp.persist(path).map_err(|e| e.error).runtime(ctx())?;
    Ok(())
}

/// Adapts a library writer that returns [`CpdError`] to an I/O closure.
pub fn io_result(r: ratio_cpd::Result<()>) -> std::io::Result<()> {
    r.map_err(|e| match e {
        CpdError::Io(io) => io,
        other => std::io::Error::other(other),
    })
}
