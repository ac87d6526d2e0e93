//! Multi-column CSV in the same dialect as traces: `# key: value` metadata,
//! one header row, then numeric rows.

use std::fmt::Write as _;

use resfluor::estimation::SaturationData;
use resfluor::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {}", v.replace('\n', " "));
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut meta = Vec::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (idx, raw) in text.split('\n').enumerate() {
            let lineno = idx + 1;
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.trim_start().strip_prefix('#') {
                if columns.is_some() {
                    return Err(Error::Parse(format!("line {lineno}: metadata after header row")));
                }
                let rest = rest.trim();
                if rest.is_empty() {
                    continue;
                }
                let (k, v) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Parse(format!("line {lineno}: metadata line needs `key: value`")))?;
                meta.push((k.trim().to_string(), v.trim().to_string()));
                continue;
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            match &columns {
                None => {
                    if cells.iter().any(|c| c.is_empty()) {
                        return Err(Error::Parse(format!("line {lineno}: empty column name")));
                    }
                    columns = Some(cells.iter().map(|c| c.to_string()).collect());
                }
                Some(cols) => {
                    if cells.len() != cols.len() {
                        return Err(Error::Parse(format!(
                            "line {lineno}: expected {} fields, found {}",
                            cols.len(),
                            cells.len()
                        )));
                    }
                    let row = cells
                        .iter()
                        .map(|c| {
                            c.parse::<f64>()
                                .ok()
                                .filter(|v| v.is_finite())
                                .ok_or_else(|| Error::Parse(format!("line {lineno}: `{c}` is not a finite number")))
                        })
                        .collect::<Result<Vec<f64>, Error>>()?;
                    rows.push(row);
                }
            }
        }
        let columns = columns.ok_or_else(|| Error::Parse("no header row (empty input?)".into()))?;
        if rows.is_empty() {
            return Err(Error::Parse("no data rows".into()));
        }
        Ok(Self { meta, columns, rows })
    }
}

pub const SWEEP_COLUMNS: [&str; 5] = [
    "power_W",
    "coherent_cps",
    "fluorescence_cps",
    "coherent_sigma",
    "fluorescence_sigma",
];

/// Reads a saturation sweep: `power_W,coherent_cps,fluorescence_cps`, optionally
/// followed by both sigma columns.
pub fn sweep_from_table(t: &Table) -> Result<SaturationData, Error> {
    let need = |name: &str| {
        t.column(name)
            .ok_or_else(|| Error::Parse(format!("sweep table lacks column `{name}`")))
    };
    let powers = need(SWEEP_COLUMNS[0])?;
    let coherent = need(SWEEP_COLUMNS[1])?;
    let fluorescence = need(SWEEP_COLUMNS[2])?;
    let (cs, fs) = (t.column(SWEEP_COLUMNS[3]), t.column(SWEEP_COLUMNS[4]));
    if cs.is_some() != fs.is_some() {
        return Err(Error::Parse("give both sigma columns or neither".into()));
    }
    Ok(SaturationData {
        powers,
        coherent,
        fluorescence,
        coherent_sigma: cs,
        fluorescence_sigma: fs,
    })
}

pub fn sweep_to_table(data: &SaturationData) -> Table {
    let with_sigma = data.coherent_sigma.is_some() && data.fluorescence_sigma.is_some();
    let cols = if with_sigma { &SWEEP_COLUMNS[..] } else { &SWEEP_COLUMNS[..3] };
    let mut t = Table::new(cols);
    for i in 0..data.powers.len() {
        let mut row = vec![data.powers[i], data.coherent[i], data.fluorescence[i]];
        if let (Some(c), Some(f)) = (&data.coherent_sigma, &data.fluorescence_sigma) {
            row.extend([c[i], f[i]]);
        }
        t.rows.push(row);
    }
    t
}
