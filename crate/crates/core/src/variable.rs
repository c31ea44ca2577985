use std::fmt;

/// Model-space variables in their within-day sampling order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Radn,
    Mint,
    Diff,
    Rain,
}

impl Variable {
    pub const ALL: [Variable; 4] = [Variable::Radn, Variable::Mint, Variable::Diff, Variable::Rain];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Radn => "radn",
            Variable::Mint => "mint",
            Variable::Diff => "diff",
            Variable::Rain => "rain",
        }
    }

    /// Same-day inputs visible to this variable's head: only the variables
    /// sampled before it on the same day.
    pub fn same_day_mask(self) -> [bool; 4] {
        let i = self.index();
        [0 < i, 1 < i, 2 < i, false]
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
