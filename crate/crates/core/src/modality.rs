use std::fmt;
use std::str::FromStr;

/// One of the five information sources a sequence is encoded into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    Body,
    Hands,
    Bones,
    Face,
    Flow,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Body,
        Modality::Hands,
        Modality::Bones,
        Modality::Face,
        Modality::Flow,
    ];

    /// Row count of the unresized stamp (and node count where a graph exists).
    pub fn joint_count(self) -> usize {
        match self {
            Modality::Body => 25,
            Modality::Hands => 42,
            Modality::Bones => 24,
            Modality::Face => 68,
            Modality::Flow => 25,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Body => "body",
            Modality::Hands => "hands",
            Modality::Bones => "bones",
            Modality::Face => "face",
            Modality::Flow => "flow",
        }
    }

    /// Code stored in raw stamp dumps.
    pub fn code(self) -> u32 {
        match self {
            Modality::Body => 0,
            Modality::Hands => 1,
            Modality::Bones => 2,
            Modality::Face => 3,
            Modality::Flow => 4,
        }
    }

    pub fn from_code(code: u32) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.code() == code)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "body" => Ok(Modality::Body),
            "hands" => Ok(Modality::Hands),
            "bones" => Ok(Modality::Bones),
            "face" => Ok(Modality::Face),
            "flow" | "motion" => Ok(Modality::Flow),
            other => Err(format!("unknown modality `{other}`")),
        }
    }
}

/// Parses a comma-separated modality list, keeping the canonical order.
pub fn parse_modality_list(s: &str) -> Result<Vec<Modality>, String> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Modality = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for m in Modality::ALL {
            assert_eq!(Modality::from_code(m.code()), Some(m));
            assert_eq!(m.name().parse::<Modality>().unwrap(), m);
        }
        assert_eq!(Modality::from_code(9), None);
    }

    #[test]
    fn list_parsing_dedups_and_orders() {
        let l = parse_modality_list("face,body,face").unwrap();
        assert_eq!(l, vec![Modality::Body, Modality::Face]);
        assert!(parse_modality_list("body,tail").is_err());
    }
}
