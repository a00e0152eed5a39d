//! CSV files written atomically: rows go to a temporary file in the target
//! directory, which is renamed into place only on `commit`.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{AppError, AppResult};

pub const SUMMARY_COLUMNS: [&str; 16] = [
    "strategy",
    "mpr",
    "replication",
    "trials",
    "successes",
    "reception_rate",
    "xi_mean",
    "xi_median",
    "xi_var",
    "xi_q1",
    "xi_q3",
    "xi_min",
    "xi_max",
    "fallback_packet_drop",
    "fallback_infeasible",
    "throughput_vph",
];

pub const RECEPTION_COLUMNS: [&str; 9] = [
    "time_s",
    "vehicle_id",
    "x_m",
    "delta",
    "xi",
    "p",
    "attempts_used",
    "success",
    "platooned",
];

pub const FALLBACK_COLUMNS: [&str; 5] = ["time_s", "vehicle_id", "from_mode", "event", "to_mode"];

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["time", "id", "lane", "position", "speed", "mode"];

pub const CURVE_COLUMNS: [&str; 4] = ["xi", "x_m", "p", "raw"];

/// Versioned first line of each file kind.
pub fn header_comment(kind: &str) -> String {
    match kind {
        "summary" => "# cacc-dsrc summary v1; xi in events/s; xi_var is the population variance; \
                      empty reception_rate means no trials; replication=pooled aggregates the cell"
            .to_owned(),
        "reception" => "# cacc-dsrc reception v1; one row per trial (up to 5 attempts); delta in veh/km; \
                        xi in events/s; platooned=0 rows are confirmation trials, excluded from metrics"
            .to_owned(),
        "fallback" => "# cacc-dsrc fallback v1; event NONE marks a platoon dissolving or forming".to_owned(),
        "trajectory" => "# cacc-dsrc trajectory v1; time s, position m, speed m/s".to_owned(),
        "curves" => "# cacc-dsrc curves v1; p clamped to [0, 1], raw is the unclamped polynomial".to_owned(),
        other => format!("# cacc-dsrc {other} v1"),
    }
}

pub struct AtomicCsv {
    dest: PathBuf,
    writer: csv::Writer<BufWriter<NamedTempFile>>,
}

impl AtomicCsv {
    pub fn create(dest: &Path, kind: &str, columns: &[&str]) -> AppResult<Self> {
        let dir = match dest.parent() {
            Some(d) if !d.as_os_str().is_empty() => d,
            _ => Path::new("."),
        };
        let mut builder = tempfile::Builder::new();
        builder.prefix(".cacc-dsrc-").suffix(".part");
        // Temporary files default to 0600; results should be world-readable.
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            builder.permissions(std::fs::Permissions::from_mode(0o644));
        }
        let tmp = builder.tempfile_in(dir).map_err(|e| AppError::io(dir, e))?;
        let mut raw = BufWriter::new(tmp);
        writeln!(raw, "{}", header_comment(kind)).map_err(|e| AppError::io(dest, e))?;
        let mut writer = csv::Writer::from_writer(raw);
        writer
            .write_record(columns)
            .map_err(|e| AppError::io(dest, e.into()))?;
        Ok(Self {
            dest: dest.to_owned(),
            writer,
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> AppResult<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(fields)
            .map_err(|e| AppError::io(&self.dest, e.into()))
    }

    pub fn commit(self) -> AppResult<PathBuf> {
        let dest = self.dest;
        let raw = self
            .writer
            .into_inner()
            .map_err(|e| AppError::io(&dest, e.into_error()))?;
        let tmp = raw.into_inner().map_err(|e| AppError::io(&dest, e.into_error()))?;
        tmp.as_file().sync_all().map_err(|e| AppError::io(&dest, e))?;
        tmp.persist(&dest).map_err(|e| AppError::io(&dest, e.error))?;
        Ok(dest)
    }
}

/// Number formatting shared by all files: shortest round-trip decimal.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
