//! Sweep cells: `variant=adding,k=4,gamma=1,sigma=4,h=500`.

use std::fmt;

use cocoa::framework::LocalSteps;
use cocoa::{SigmaPrime, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub source: String,
    pub variant: Variant,
    pub k: usize,
    pub gamma: Option<f64>,
    pub sigma_prime: SigmaPrime,
    pub local_steps: Option<LocalSteps>,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell {} ({})", self.index, self.source)
    }
}

impl Cell {
    /// Parses one `--cell` value. Keys: `variant`, `k`, `gamma`, `sigma`
    /// (alias `sigma_prime`), `h`. `variant` and `k` are required.
    pub fn parse(index: usize, source: &str) -> Result<Self, String> {
        let mut variant = None;
        let mut k = None;
        let mut gamma = None;
        let mut sigma_prime = SigmaPrime::Safe;
        let mut local_steps = None;
        let ctx = |msg: String| format!("cell {index} ({source}): {msg}");
        for pair in source.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| ctx(format!("expected key=value, got {pair:?}")))?;
            let value = value.trim();
            match key.trim() {
                "variant" => variant = Some(value.parse::<Variant>().map_err(|e| ctx(e.to_string()))?),
                "k" => k = Some(value.parse::<usize>().map_err(|_| ctx(format!("bad k {value:?}")))?),
                "gamma" => gamma = Some(value.parse::<f64>().map_err(|_| ctx(format!("bad gamma {value:?}")))?),
                "sigma" | "sigma_prime" => sigma_prime = value.parse().map_err(|e: cocoa::Error| ctx(e.to_string()))?,
                "h" => local_steps = Some(value.parse().map_err(|e: cocoa::Error| ctx(e.to_string()))?),
                other => return Err(ctx(format!("unknown key {other:?}"))),
            }
        }
        Ok(Self {
            index,
            source: source.to_string(),
            variant: variant.ok_or_else(|| ctx("missing variant".into()))?,
            k: k.ok_or_else(|| ctx("missing k".into()))?,
            gamma,
            sigma_prime,
            local_steps,
        })
    }

    /// A file-name stem such as `cell-0-adding-k4`.
    pub fn stem(&self) -> String {
        format!("cell-{}-{}-k{}", self.index, self.variant.name(), self.k)
    }
}
