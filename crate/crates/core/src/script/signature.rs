//! Operation signatures.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::Expr;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "of", rename_all = "snake_case")]
pub enum SemanticType {
    Audio,
    Text,
    Num,
    ListOf(Box<SemanticType>),
    TupleOf(Vec<SemanticType>),
    Void,
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemanticType::Audio => f.write_str("Audio"),
            SemanticType::Text => f.write_str("Text"),
            SemanticType::Num => f.write_str("Num"),
            SemanticType::Void => f.write_str("Void"),
            SemanticType::ListOf(inner) => write!(f, "list[{inner}]"),
            SemanticType::TupleOf(items) => {
                let parts: Vec<String> = items.iter().map(|t| t.to_string()).collect();
                write!(f, "tuple[{}]", parts.join(", "))
            }
        }
    }
}

/// What happens when a parameter is omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamDefault {
    Required,
    /// May be omitted; the operation treats it as absent.
    Absent,
    Num(f64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: SemanticType,
    pub default: ParamDefault,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultShape {
    Single(SemanticType),
    /// Fixed number of values, destructured by position.
    Multi(Vec<SemanticType>),
    /// A list of audio segments; destructurable when the count is known
    /// statically.
    Segments,
}

impl ResultShape {
    /// Number of values a destructuring assignment may bind, when fixed.
    pub fn arity(&self) -> Option<usize> {
        match self {
            ResultShape::Single(_) => Some(1),
            ResultShape::Multi(items) => Some(items.len()),
            ResultShape::Segments => None,
        }
    }

    pub fn semantic_type(&self) -> SemanticType {
        match self {
            ResultShape::Single(ty) => ty.clone(),
            ResultShape::Multi(items) => SemanticType::TupleOf(items.clone()),
            ResultShape::Segments => SemanticType::ListOf(Box::new(SemanticType::Audio)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
    pub result: ResultShape,
    /// Calls passing several positional items (or a bare tuple) are read
    /// as a single list argument.
    pub variadic_list: bool,
    pub generative: bool,
    pub doc: String,
}

/// Arguments of a call matched to parameter slots.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundArgs<'a> {
    pub slots: Vec<Option<&'a Expr>>,
}

impl Signature {
    pub fn param(&self, name: &str) -> Option<(usize, &Param)> {
        self.params.iter().enumerate().find(|(_, p)| p.name == name)
    }

    /// Matches positional and keyword arguments to parameters.
    pub fn bind<'a>(&self, positional: &'a [Expr], keyword: &'a [(String, Expr)]) -> Result<BoundArgs<'a>, String> {
        let mut slots: Vec<Option<&'a Expr>> = vec![None; self.params.len()];
        if positional.len() > self.params.len() {
            return Err(format!(
                "{} takes at most {} argument(s), got {} positional",
                self.name,
                self.params.len(),
                positional.len()
            ));
        }
        for (slot, arg) in slots.iter_mut().zip(positional) {
            *slot = Some(arg);
        }
        for (name, arg) in keyword {
            let Some((idx, _)) = self.param(name) else {
                return Err(format!("{} has no parameter named `{name}`", self.name));
            };
            if slots[idx].is_some() {
                return Err(format!("{} got multiple values for `{name}`", self.name));
            }
            slots[idx] = Some(arg);
        }
        for (param, slot) in self.params.iter().zip(&slots) {
            if slot.is_none() && param.default == ParamDefault::Required {
                return Err(format!("{} is missing required argument `{}`", self.name, param.name));
            }
        }
        Ok(BoundArgs { slots })
    }
}

/// Registered operations by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignatureTable {
    ops: BTreeMap<String, Signature>,
}

pub const SPEAKERS: [&str; 4] = ["Male1_En", "Male2_En", "Female1_En", "Female2_En"];

/// Default ranges for ROOM_SIMULATE parameters, as (name, min, max).
pub const ROOM_DEFAULTS: [(&str, f64, f64); 10] = [
    ("size_x", 3.6, 5.6),
    ("size_y", 3.6, 3.9),
    ("size_z", 2.4, 3.0),
    ("absorption_value", 0.075, 0.4),
    ("source_x", 0.1, 3.5),
    ("source_y", 0.1, 2.7),
    ("source_z", 1.0, 2.1),
    ("mic_distance", 0.15, 0.35),
    ("mic_azimuth", -180.0, 180.0),
    ("mic_elevation", -90.0, 90.0),
];

impl SignatureTable {
    pub fn get(&self, op: &str) -> Option<&Signature> {
        self.ops.get(op)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// The built-in operation set.
    pub fn standard() -> SignatureTable {
        use ParamDefault::{Absent, Required};
        use SemanticType::{Audio, Num, Text};

        fn p(name: &str, ty: SemanticType, default: ParamDefault) -> Param {
            Param { name: name.to_string(), ty, default }
        }
        fn n(value: f64) -> ParamDefault {
            ParamDefault::Num(value)
        }
        let list = |ty: SemanticType| SemanticType::ListOf(Box::new(ty));
        let single = |ty: SemanticType| ResultShape::Single(ty);

        let mut ops = BTreeMap::new();
        let mut add = |name: &str, params: Vec<Param>, result: ResultShape, generative: bool, doc: &str| {
            let sig = Signature {
                name: name.to_string(),
                params,
                result,
                variadic_list: matches!(name, "MIX" | "CAT"),
                generative,
                doc: doc.to_string(),
            };
            ops.insert(name.to_string(), sig);
        };

        add("LEN", vec![p("wav", Audio, Required)], single(Num), false, "duration of `wav` in seconds");
        add(
            "MIX",
            vec![p("wavs", list(SemanticType::TupleOf(vec![Audio, Num])), Required)],
            single(Audio),
            false,
            "mixture of (wav, onset seconds) pairs",
        );
        add("CAT", vec![p("wavs", list(Audio), Required)], single(Audio), false, "concatenation of `wavs`");
        add(
            "SPLIT",
            vec![p("wav", Audio, Required), p("break_points", list(Num), Required)],
            ResultShape::Segments,
            false,
            "segments of `wav` cut at `break_points` seconds",
        );
        add(
            "CLIP",
            vec![p("wav", Audio, Required), p("onset", Num, Required), p("offset", Num, Required)],
            single(Audio),
            false,
            "the part of `wav` between `onset` and `offset` seconds",
        );
        add(
            "ADJUST_VOL",
            vec![p("wav", Audio, Required), p("volume", Num, Required)],
            single(Audio),
            false,
            "`wav` with gain `volume` dB",
        );
        add(
            "TTA",
            vec![p("text", Text, Required), p("length", Num, n(5.0)), p("volume", Num, n(0.0))],
            single(Audio),
            true,
            "generated audio conditioned on `text`",
        );
        add(
            "TTM",
            vec![
                p("text", Text, Required),
                p("melody", Audio, Absent),
                p("length", Num, n(10.0)),
                p("volume", Num, n(0.0)),
            ],
            single(Audio),
            true,
            "generated music conditioned on `text` and optional `melody`",
        );
        add(
            "TTS",
            vec![
                p("text", Text, Required),
                p("speaker", Text, ParamDefault::Text(SPEAKERS[0].to_string())),
                p("volume", Num, n(0.0)),
            ],
            single(Audio),
            true,
            "generated speech of `text` by `speaker`",
        );
        add(
            "SR",
            vec![
                p("wav", Audio, Required),
                p("ddim_steps", Num, n(50.0)),
                p("guidance_scale", Num, n(3.5)),
                p("seed", Num, Absent),
            ],
            single(Audio),
            true,
            "`wav` upsampled to 48 kHz",
        );
        add(
            "TSS",
            vec![p("wav", Audio, Required), p("text", Text, Required)],
            ResultShape::Multi(vec![Audio, Audio]),
            true,
            "foreground and background of `wav` conditioned on `text`",
        );
        add(
            "EXTRACT",
            vec![p("wav", Audio, Required), p("text", Text, Required)],
            single(Audio),
            true,
            "the sound described by `text` extracted from `wav`",
        );
        add(
            "DROP",
            vec![p("wav", Audio, Required), p("text", Text, Required)],
            single(Audio),
            true,
            "`wav` with the sound described by `text` removed",
        );
        add(
            "INPAINT",
            vec![
                p("wav", Audio, Required),
                p("text", Text, Required),
                p("onset", Num, Required),
                p("offset", Num, Required),
                p("duration", Num, Absent),
            ],
            single(Audio),
            true,
            "`wav` with the part between `onset` and `offset` regenerated",
        );
        add(
            "ADD_NOISE",
            vec![p("wav", Audio, Required), p("min_snr_db", Num, n(5.0)), p("max_snr_db", Num, n(40.0))],
            single(Audio),
            false,
            "`wav` mixed with gaussian noise",
        );
        add(
            "LOW_PASS",
            vec![
                p("wav", Audio, Required),
                p("min_cutoff_freq", Num, n(150.0)),
                p("max_cutoff_freq", Num, n(7500.0)),
                p("min_rolloff", Num, n(12.0)),
                p("max_rolloff", Num, n(24.0)),
            ],
            single(Audio),
            false,
            "`wav` processed by a low-pass filter",
        );
        add(
            "HIGH_PASS",
            vec![
                p("wav", Audio, Required),
                p("min_cutoff_freq", Num, n(20.0)),
                p("max_cutoff_freq", Num, n(2400.0)),
                p("min_rolloff", Num, n(12.0)),
                p("max_rolloff", Num, n(24.0)),
            ],
            single(Audio),
            false,
            "`wav` processed by a high-pass filter",
        );
        add(
            "ADD_RIR",
            vec![p("wav", Audio, Required), p("ir", Audio, Required)],
            single(Audio),
            false,
            "`wav` convolved with the impulse response `ir`",
        );
        let mut room = vec![p("wav", Audio, Required)];
        for (name, lo, hi) in ROOM_DEFAULTS {
            room.push(p(&format!("min_{name}"), Num, n(lo)));
            room.push(p(&format!("max_{name}"), Num, n(hi)));
        }
        add("ROOM_SIMULATE", room, single(Audio), false, "`wav` in a simulated room");

        SignatureTable { ops }
    }
}

impl Default for SignatureTable {
    fn default() -> Self {
        SignatureTable::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_table_contents() {
        let table = SignatureTable::standard();
        let names: Vec<&str> = table.names().collect();
        let mut expected = vec![
            "LEN",
            "MIX",
            "CAT",
            "SPLIT",
            "CLIP",
            "ADJUST_VOL",
            "TTA",
            "TTM",
            "TTS",
            "SR",
            "TSS",
            "EXTRACT",
            "DROP",
            "INPAINT",
            "ADD_NOISE",
            "LOW_PASS",
            "HIGH_PASS",
            "ADD_RIR",
            "ROOM_SIMULATE",
        ];
        expected.sort();
        assert_eq!(names, expected);
        for name in table.names() {
            let sig = table.get(name).unwrap();
            assert!(sig.result.arity().unwrap_or(1) >= 1);
        }
        assert_eq!(table.get("TSS").unwrap().result.arity(), Some(2));
        assert_eq!(table.get("ROOM_SIMULATE").unwrap().params.len(), 21);
    }

    #[test]
    fn binding_rules() {
        let table = SignatureTable::standard();
        let tts = table.get("TTS").unwrap();
        let positional = vec![Expr::string("Bravo")];
        let keyword = vec![("volume".to_string(), Expr::int(5))];
        let bound = tts.bind(&positional, &keyword).unwrap();
        assert_eq!(bound.slots[0], Some(&positional[0]));
        assert_eq!(bound.slots[1], None);
        assert_eq!(bound.slots[2], Some(&keyword[0].1));

        assert!(tts.bind(&[], &keyword).unwrap_err().contains("missing"));
        let dup = vec![("text".to_string(), Expr::string("x"))];
        assert!(tts.bind(&positional, &dup).unwrap_err().contains("multiple"));
        let unknown = vec![("pitch".to_string(), Expr::int(1))];
        assert!(tts.bind(&positional, &unknown).is_err());
    }
}
