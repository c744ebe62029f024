use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Therapy stage ladder; declaration order is progression order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TherapyStage {
    Entry,
    Basic,
    Middle,
    Advanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CognitiveStage {
    Sensorimotor,
    Preoperational,
    ConcreteOperations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HumorStyle {
    IncongruousActions,
    IncongruousEvents,
    ConceptualIncongruity,
    MultipleMeanings,
}

/// Perception channel an interaction is carried on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    Image,
    Voice,
}

impl TherapyStage {
    pub const ALL: [TherapyStage; 4] = [
        TherapyStage::Entry,
        TherapyStage::Basic,
        TherapyStage::Middle,
        TherapyStage::Advanced,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn next(self) -> Option<TherapyStage> {
        Self::ALL.get(self.index() + 1).copied()
    }

    pub fn cognitive_stage(self) -> CognitiveStage {
        match self {
            TherapyStage::Entry | TherapyStage::Basic => CognitiveStage::Sensorimotor,
            TherapyStage::Middle => CognitiveStage::Preoperational,
            TherapyStage::Advanced => CognitiveStage::ConcreteOperations,
        }
    }

    pub fn humor_style(self) -> HumorStyle {
        match self {
            TherapyStage::Entry => HumorStyle::IncongruousActions,
            TherapyStage::Basic => HumorStyle::IncongruousEvents,
            TherapyStage::Middle => HumorStyle::ConceptualIncongruity,
            TherapyStage::Advanced => HumorStyle::MultipleMeanings,
        }
    }

    /// The robot program used at this stage.
    pub fn program(self) -> &'static str {
        match self {
            TherapyStage::Entry => "Funny Behaviors",
            TherapyStage::Basic => "Interesting Expression",
            TherapyStage::Middle => "Knock-Knock Jokes",
            TherapyStage::Advanced => "Sarcastic Jokes",
        }
    }

    /// Data types the stage's interactions are perceived through.
    pub fn modalities(self) -> &'static [Modality] {
        match self {
            TherapyStage::Entry => &[Modality::Image],
            _ => &[Modality::Image, Modality::Voice],
        }
    }

    /// Tree ids shipped for this stage, default first.
    pub fn builtin_tree_ids(self) -> &'static [&'static str] {
        match self {
            TherapyStage::Entry => &["entry_playball", "entry_chasing", "entry_spinning"],
            TherapyStage::Basic => &["basic_aladdin"],
            TherapyStage::Middle => &["middle_knockknock"],
            TherapyStage::Advanced => &["advanced_sarcasm_1", "advanced_sarcasm_2"],
        }
    }

    pub fn default_tree_id(self) -> &'static str {
        self.builtin_tree_ids()[0]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TherapyStage::Entry => "Entry",
            TherapyStage::Basic => "Basic",
            TherapyStage::Middle => "Middle",
            TherapyStage::Advanced => "Advanced",
        }
    }
}

impl fmt::Display for TherapyStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TherapyStage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TherapyStage::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown therapy stage {s:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // (stage, cognitive stage, humor style, program, data types), one row per stage.
    #[test]
    fn stage_table_rows() {
        use CognitiveStage::*;
        use HumorStyle::*;
        use Modality::*;
        let rows = [
            (TherapyStage::Entry, Sensorimotor, IncongruousActions, "Funny Behaviors", vec![Image]),
            (TherapyStage::Basic, Sensorimotor, IncongruousEvents, "Interesting Expression", vec![Image, Voice]),
            (TherapyStage::Middle, Preoperational, ConceptualIncongruity, "Knock-Knock Jokes", vec![Image, Voice]),
            (TherapyStage::Advanced, ConcreteOperations, MultipleMeanings, "Sarcastic Jokes", vec![Image, Voice]),
        ];
        assert_eq!(rows.len(), TherapyStage::ALL.len());
        for (stage, cog, humor, program, data) in rows {
            assert_eq!(stage.cognitive_stage(), cog);
            assert_eq!(stage.humor_style(), humor);
            assert_eq!(stage.program(), program);
            assert_eq!(stage.modalities(), data.as_slice());
        }
        let styles: std::collections::HashSet<_> =
            TherapyStage::ALL.iter().map(|s| s.humor_style()).collect();
        assert_eq!(styles.len(), 4);
    }

    #[test]
    fn ladder_order() {
        assert!(TherapyStage::Entry < TherapyStage::Basic);
        assert!(TherapyStage::Middle < TherapyStage::Advanced);
        assert_eq!(TherapyStage::Middle.next(), Some(TherapyStage::Advanced));
        assert_eq!(TherapyStage::Advanced.next(), None);
        assert_eq!("middle".parse::<TherapyStage>().unwrap(), TherapyStage::Middle);
        assert!("Expert".parse::<TherapyStage>().is_err());
    }
}
