//! Bundled example data for the train timetable, request and circuit domains.
//!
//! The JSON files under `fixtures/` are written from these builders by the
//! `write_fixtures` example and checked against them by the test suite.

use std::collections::BTreeMap;

use crate::avm::{
    AttributeDef, AvmSchema, Corpus, Dialogue, InfoFlow, ScenarioKey, Speaker, Utterance,
};
use crate::error::{Error, Result};
use crate::performance::{NormalizationPool, PoolMember, Unit};
use crate::stats::NormParams;

/// Confusion counts for agent A over the train schema (rows data, columns key).
pub const AGENT_A_MATRIX: [[u64; 14]; 14] = [
    [22, 0, 1, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 29, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [4, 0, 16, 4, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 5, 11, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [3, 0, 0, 0, 20, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 22, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 2, 0, 1, 1, 20, 5, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 1, 2, 8, 15, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 45, 10, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 5, 40, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 20, 0, 2, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 19, 2, 4],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 0, 18, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 2, 6, 3, 21],
];

/// Confusion counts for agent B.
pub const AGENT_B_MATRIX: [[u64; 14]; 14] = [
    [16, 0, 1, 0, 4, 0, 0, 0, 3, 2, 0, 0, 0, 0],
    [1, 20, 1, 0, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0],
    [5, 1, 9, 4, 2, 0, 4, 2, 0, 0, 0, 0, 0, 0],
    [1, 2, 6, 6, 0, 0, 2, 3, 0, 0, 0, 0, 0, 0],
    [4, 0, 0, 0, 15, 0, 0, 0, 2, 3, 0, 0, 0, 0],
    [1, 6, 0, 0, 0, 19, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 5, 2, 1, 1, 15, 4, 0, 0, 0, 0, 0, 0],
    [0, 1, 3, 3, 1, 2, 9, 11, 0, 0, 0, 0, 0, 0],
    [2, 0, 0, 0, 2, 0, 0, 0, 39, 10, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 6, 35, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 20, 5, 5, 4],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 10, 5, 5],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 5, 5, 10, 5],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 5, 5, 11],
];

/// Per-user measurements: (user, agent, satisfaction, κ, #utterances, #repairs).
pub const USER_MEASUREMENTS: [(u32, &str, f64, f64, f64, f64); 16] = [
    (1, "A", 1.0, 1.0, 46.0, 30.0),
    (2, "A", 2.0, 1.0, 50.0, 30.0),
    (3, "A", 2.0, 1.0, 52.0, 30.0),
    (4, "A", 3.0, 1.0, 40.0, 20.0),
    (5, "A", 4.0, 1.0, 23.0, 10.0),
    (6, "A", 2.0, 1.0, 50.0, 36.0),
    (7, "A", 1.0, 0.46, 75.0, 30.0),
    (8, "A", 1.0, 0.19, 60.0, 30.0),
    (9, "B", 6.0, 1.0, 8.0, 0.0),
    (10, "B", 5.0, 1.0, 15.0, 1.0),
    (11, "B", 6.0, 1.0, 10.0, 0.5),
    (12, "B", 5.0, 1.0, 20.0, 3.0),
    (13, "B", 1.0, 0.19, 45.0, 18.0),
    (14, "B", 1.0, 0.46, 50.0, 22.0),
    (15, "B", 2.0, 0.19, 34.0, 18.0),
    (16, "B", 2.0, 0.46, 40.0, 18.0),
];

pub fn agent_a_counts() -> Vec<Vec<u64>> {
    AGENT_A_MATRIX.iter().map(|r| r.to_vec()).collect()
}

pub fn agent_b_counts() -> Vec<Vec<u64>> {
    AGENT_B_MATRIX.iter().map(|r| r.to_vec()).collect()
}

const CITIES: [&str; 4] = ["Milano", "Roma", "Torino", "Trento"];

fn train_attributes() -> Vec<AttributeDef> {
    vec![
        AttributeDef::new("depart-city", "DC", CITIES).with_flow(InfoFlow::ToAgent),
        AttributeDef::new("arrival-city", "AC", CITIES).with_flow(InfoFlow::ToAgent),
        AttributeDef::new("depart-range", "DR", ["morning", "evening"])
            .with_flow(InfoFlow::ToAgent),
        AttributeDef::new("depart-time", "DT", ["6am", "8am", "6pm", "8pm"])
            .with_flow(InfoFlow::ToUser),
    ]
}

/// Simplified train timetable schema: four attributes, fourteen values.
pub fn train_schema() -> AvmSchema {
    AvmSchema::new(train_attributes()).expect("train schema is valid")
}

fn key(id: &str, pairs: &[(&str, &str)]) -> ScenarioKey {
    ScenarioKey {
        id: id.into(),
        assignments: pairs
            .iter()
            .map(|(a, v)| (a.to_string(), v.to_string()))
            .collect(),
    }
}

/// Torino to Milano in the evening, 8pm train.
pub fn train_key() -> ScenarioKey {
    key(
        "torino-milano-evening",
        &[
            ("DC", "Torino"),
            ("AC", "Milano"),
            ("DR", "evening"),
            ("DT", "8pm"),
        ],
    )
}

fn dialogue(
    id: &str,
    agent: &str,
    user: &str,
    key: &ScenarioKey,
    satisfaction: Option<f64>,
    utterances: Vec<Utterance>,
) -> Dialogue {
    Dialogue {
        id: id.into(),
        agent: agent.into(),
        user: user.into(),
        scenario: key.id.clone(),
        satisfaction,
        observed: key.assignments.clone(),
        utterances,
    }
}

const ALL_TRAIN: [&str; 4] = ["DC", "AC", "DR", "DT"];

fn greeting(speaker: Speaker, tags: &[&str]) -> Vec<Utterance> {
    [
        "Hello, This is Train Enquiry Service.",
        "Please speak after the tone.",
        "Which information do you need?",
    ]
    .iter()
    .map(|t| Utterance::new(speaker, *t, tags))
    .collect()
}

/// Explicit-confirmation dialogue (agent A, user 5): 23 utterances, ten repairs.
fn explicit_confirmation_dialogue(key: &ScenarioKey) -> Dialogue {
    use Speaker::{Agent, User};
    let rep = |u: Utterance| {
        let tags: Vec<String> = u.tags.clone();
        let targets: Vec<&str> = tags.iter().map(String::as_str).collect();
        u.with_event("repair", &targets)
    };
    let mut utts = greeting(Agent, &ALL_TRAIN);
    utts.extend([
        Utterance::new(User, "I want to go from Torino to Milano.", &["DC", "AC"]),
        Utterance::new(
            Agent,
            "Do you want to go from Trento to Milano?",
            &["DC", "AC"],
        ),
        Utterance::new(Agent, "Yes or No?", &["DC", "AC"]),
        Utterance::new(User, "No.", &["DC", "AC"]),
        rep(Utterance::new(
            Agent,
            "Do you want to leave from Trento?",
            &["DC"],
        )),
        rep(Utterance::new(Agent, "Yes or No?", &["DC"])),
        rep(Utterance::new(User, "No.", &["DC"])),
        rep(Utterance::new(
            Agent,
            "Where do you want to leave from?",
            &["DC"],
        )),
        rep(Utterance::new(
            User,
            "I want to leave from Torino.",
            &["DC"],
        )),
        rep(Utterance::new(
            Agent,
            "Do you want to leave from Torino?",
            &["DC"],
        )),
        rep(Utterance::new(Agent, "Yes or No?", &["DC"])),
        rep(Utterance::new(User, "Yes.", &["DC"])),
        rep(Utterance::new(
            Agent,
            "Do you want to go to Milano?",
            &["AC"],
        )),
        rep(Utterance::new(User, "Yes.", &["AC"])),
        Utterance::new(Agent, "At which time do you want to leave?", &["DR"]),
        Utterance::new(User, "I want to travel in the evening.", &["DR"]),
        Utterance::new(Agent, "Do you want to leave between 6 and 9 p.m.?", &["DR"]),
        Utterance::new(Agent, "Yes or No?", &["DR"]),
        Utterance::new(User, "Yes.", &["DR"]),
        Utterance::new(Agent, "There is a train leaving at 8:00 p.m.", &["DT"]),
    ]);
    dialogue("D1", "A", "5", key, Some(4.0), utts)
}

/// Implicit-confirmation dialogue (agent B, user 11): 10 utterances, one
/// repair shared between depart-city and depart-range.
fn implicit_confirmation_dialogue(key: &ScenarioKey) -> Dialogue {
    use Speaker::{Agent, User};
    let mut utts = greeting(Agent, &ALL_TRAIN);
    utts.extend([
        Utterance::new(
            User,
            "I want to travel from Torino to Milano.",
            &["DC", "AC"],
        ),
        Utterance::new(
            Agent,
            "At which time do you want to leave from Merano to Milano?",
            &["DC", "AC", "DR"],
        ),
        Utterance::new(
            User,
            "No, I want to leave from Torino in the evening.",
            &["DC", "DR"],
        )
        .with_event("repair", &["DC"]),
        Utterance::new(
            Agent,
            "Do you want to leave from Torino between 6 and 11 p.m?",
            &["DC", "DR"],
        ),
        Utterance::new(Agent, "Please answer Yes or No.", &["DC", "DR"]),
        Utterance::new(User, "Yes.", &["DC", "DR"]),
        Utterance::new(Agent, "A train leaves at 8 p.m.", &["DT"]),
    ]);
    dialogue("D2", "B", "11", key, Some(6.0), utts)
}

/// The two annotated train dialogues over one scenario.
pub fn train_dialogues() -> Corpus {
    let key = train_key();
    Corpus {
        schema: train_schema(),
        dialogues: vec![
            explicit_confirmation_dialogue(&key),
            implicit_confirmation_dialogue(&key),
        ],
        scenarios: vec![key],
    }
}

/// Train schema with no scenarios or dialogues.
pub fn empty_corpus() -> Corpus {
    Corpus {
        schema: train_schema(),
        scenarios: Vec::new(),
        dialogues: Vec::new(),
    }
}

/// Expands a full confusion table into one dialogue per row of observations.
///
/// Every attribute block must have the same total (the number of dialogues).
/// Within a block, columns are walked in order and each cell (r, c) emits
/// `counts[r][c]` observations with key c and observed r; observation i of every
/// attribute goes to dialogue i. Two tables with equal column sums therefore
/// yield the same scenario for each dialogue index.
pub fn expand_confusion(
    schema: &AvmSchema,
    counts: &[Vec<u64>],
    agent: &str,
    id_prefix: &str,
) -> Result<Corpus> {
    let n = schema.label_count();
    if counts.len() != n || counts.iter().any(|r| r.len() != n) {
        return Err(Error::invalid(format!("count table must be {n}x{n}")));
    }
    let labels: Vec<_> = schema.labels().collect();
    let mut per_attr: Vec<Vec<(usize, usize)>> = Vec::new();
    for a in 0..schema.len() {
        let mut obs = Vec::new();
        for c in schema.block(a) {
            for (r, row) in counts.iter().enumerate() {
                obs.extend(std::iter::repeat((c, r)).take(row[c] as usize));
            }
        }
        per_attr.push(obs);
    }
    let total = per_attr[0].len();
    if per_attr.iter().any(|o| o.len() != total) {
        return Err(Error::invalid("attribute blocks have different totals"));
    }

    let text = |attribute: usize, label_idx: usize| {
        let label = labels[label_idx];
        let attr = schema.attribute(label.attribute);
        if label.attribute == attribute {
            attr.values[label.value].clone()
        } else {
            schema.label_name(label)
        }
    };

    let mut scenarios: Vec<ScenarioKey> = Vec::new();
    let mut dialogues = Vec::with_capacity(total);
    let width = total.to_string().len().max(3);
    for i in 0..total {
        let key_values: BTreeMap<String, String> = (0..schema.len())
            .map(|a| {
                (
                    schema.attribute(a).abbrev.clone(),
                    text(a, per_attr[a][i].0),
                )
            })
            .collect();
        let scenario = match scenarios.iter().find(|k| k.assignments == key_values) {
            Some(k) => k.id.clone(),
            None => {
                let id = format!("s{:02}", scenarios.len() + 1);
                scenarios.push(ScenarioKey {
                    id: id.clone(),
                    assignments: key_values,
                });
                id
            }
        };
        let observed = (0..schema.len())
            .map(|a| {
                (
                    schema.attribute(a).abbrev.clone(),
                    text(a, per_attr[a][i].1),
                )
            })
            .collect();
        dialogues.push(Dialogue {
            id: format!("{id_prefix}{:0width$}", i + 1),
            agent: agent.into(),
            user: format!("{}-user{:0width$}", agent.to_lowercase(), i + 1),
            scenario,
            satisfaction: None,
            observed,
            utterances: Vec::new(),
        });
    }
    Ok(Corpus {
        schema: schema.clone(),
        scenarios,
        dialogues,
    })
}

/// 100 agent-A dialogues whose confusion matrix is [`AGENT_A_MATRIX`].
pub fn agent_a_corpus() -> Corpus {
    expand_confusion(&train_schema(), &agent_a_counts(), "A", "A").expect("table 3 expands")
}

/// 100 agent-B dialogues whose confusion matrix is [`AGENT_B_MATRIX`].
pub fn agent_b_corpus() -> Corpus {
    expand_confusion(&train_schema(), &agent_b_counts(), "B", "B").expect("table 4 expands")
}

pub fn user_units() -> Vec<Unit> {
    USER_MEASUREMENTS
        .iter()
        .map(|&(user, agent, us, kappa, utt, rep)| Unit {
            id: user.to_string(),
            group: agent.into(),
            satisfaction: Some(us),
            kappa,
            costs: [("utt".to_string(), utt), ("rep".to_string(), rep)].into(),
        })
        .collect()
}

/// Repair-cost pool for depart-city repair subdialogues of both agents: the pool
/// statistics (mean 4, std 2.79) and each strategy's mean repair count are
/// given rather than derived from annotated segments.
pub fn depart_city_repair_pool() -> NormalizationPool {
    NormalizationPool {
        pool_id: "depart-city-repairs".into(),
        members: vec![
            PoolMember {
                scope: "R_A".into(),
                kappa: None,
                costs: [("rep".to_string(), 6.0)].into(),
            },
            PoolMember {
                scope: "R_B".into(),
                kappa: None,
                costs: [("rep".to_string(), 1.38)].into(),
            },
        ],
        kappa_norm: None,
        cost_norms: [(
            "rep".to_string(),
            NormParams::given(4.0, 2.79).expect("positive std"),
        )]
        .into(),
    }
}

/// Train schema extended with a request type.
pub fn request_schema() -> AvmSchema {
    let mut attrs = train_attributes();
    attrs.push(
        AttributeDef::new("request-type", "RT", ["reserve", "purchase"])
            .with_flow(InfoFlow::ToAgent),
    );
    AvmSchema::new(attrs).expect("request schema is valid")
}

/// No-confirmation dialogue with clarification questions and a reservation request.
pub fn request_domain() -> Corpus {
    use Speaker::{Agent, User};
    let key = key(
        "torino-roma-morning-reserve",
        &[
            ("DC", "Torino"),
            ("AC", "Roma"),
            ("DR", "morning"),
            ("DT", "8am"),
            ("RT", "reserve"),
        ],
    );
    let utts = vec![
        Utterance::new(User, "I want to go from Torino to Roma", &["DC", "AC"]),
        Utterance::new(
            Agent,
            "Approximately what time of day would you like to travel?",
            &["DR"],
        ),
        Utterance::new(User, "What are the options?", &["DR"]),
        Utterance::new(Agent, "Morning or evening.", &["DR"]),
        Utterance::new(User, "Are those departure times?", &["DR"]),
        Utterance::new(Agent, "Yes.", &["DR"]),
        Utterance::new(User, "I'd like to leave in the morning.", &["DR"]),
        Utterance::new(Agent, "Train 702 leaves Torino Porto at 8 a.m.", &["DT"]),
        Utterance::new(User, "Please reserve me a seat on that train.", &["RT"]),
    ];
    Corpus {
        schema: request_schema(),
        dialogues: vec![dialogue("C1", "C", "c1", &key, None, utts)],
        scenarios: vec![key],
    }
}

pub fn circuit_schema() -> AvmSchema {
    AvmSchema::new(vec![
        AttributeDef::new("Circuit-ID", "ID", ["RS111", "RS112"]),
        AttributeDef::new("Correct-Circuit-Behavior", "CB", ["Flash-1-7", "Flash-1"]),
        AttributeDef::new("Current-Circuit-Behavior", "RB", ["Flash-7"]),
        AttributeDef::new("Fault-Type", "FT", ["MissingWire84-99", "MissingWire88-99"]),
        AttributeDef::new("Fault-Correction", "FC", ["yes", "no"]),
        AttributeDef::new("Test", "T", ["yes", "no"]),
    ])
    .expect("circuit schema is valid")
}

/// Circuit repair dialogue: 35 turns, 37 utterances.
pub fn circuit_domain() -> Corpus {
    use Speaker::{Agent, User};
    let key = key(
        "rs111-missing-wire",
        &[
            ("ID", "RS111"),
            ("CB", "Flash-1-7"),
            ("RB", "Flash-7"),
            ("FT", "MissingWire84-99"),
            ("FC", "yes"),
            ("T", "yes"),
        ],
    );
    let all = ["ID", "CB", "RB", "FT", "FC", "T"];
    let lines: Vec<(Speaker, &str, &[&str])> = vec![
        (Agent, "This is the circuit fix it shop.", &all),
        (Agent, "How may I help you?", &all),
        (User, "I want to fix a circuit.", &all),
        (Agent, "What is the ID of the circuit?", &["ID"]),
        (User, "Rs111.", &["ID"]),
        (Agent, "I am familiar with that circuit.", &["CB"]),
        (
            Agent,
            "The LED is supposed to be displaying alternately flashing one and seven.",
            &["CB"],
        ),
        (User, "The LED is off.", &["RB"]),
        (Agent, "What is the switch at when the LED is off?", &["RB"]),
        (User, "The switch is down.", &["RB"]),
        (Agent, "Put the switch up.", &["RB"]),
        (User, "Okay.", &["RB"]),
        (Agent, "Put the knob to one zero.", &["RB"]),
        (User, "Okay.", &["RB"]),
        (Agent, "What is the LED displaying?", &["RB"]),
        (User, "LED is displaying only a flashing seven.", &["RB"]),
        (
            Agent,
            "Is there a wire between connector eight four and connector nine nine?",
            &["FT"],
        ),
        (User, "No.", &["FT"]),
        (
            Agent,
            "Add a wire between connector eight four and connector nine nine.",
            &["FC"],
        ),
        (User, "Done.", &["FC"]),
        (Agent, "What is the LED displaying?", &["T"]),
        (User, "Alternately flashing one and seven.", &["T"]),
        (
            Agent,
            "Is the one on the LED displaying for a longer period of time?",
            &["T"],
        ),
        (User, "No.", &["T"]),
        (
            Agent,
            "Is the seven on the LED displaying for a longer period of time?",
            &["T"],
        ),
        (User, "No.", &["T"]),
        (Agent, "Put the knob to zero.", &["T"]),
        (User, "Okay.", &["T"]),
        (Agent, "What is the LED displaying?", &["T"]),
        (User, "Alternately displaying one and seven.", &["T"]),
        (
            Agent,
            "Is the one on the LED displaying for a longer period of time?",
            &["T"],
        ),
        (User, "Yes.", &["T"]),
        (Agent, "Put the switch down.", &["T"]),
        (User, "The switch is down.", &["T"]),
        (Agent, "What is the LED displaying?", &["T"]),
        (User, "Nothing.", &["T"]),
        (
            Agent,
            "The circuit is working correctly.  Good-bye.",
            &["T"],
        ),
    ];
    let utts = lines
        .into_iter()
        .map(|(s, t, tags)| Utterance::new(s, t, tags))
        .collect();
    Corpus {
        schema: circuit_schema(),
        dialogues: vec![dialogue("G1", "circuit-fix-it", "g1", &key, None, utts)],
        scenarios: vec![key],
    }
}

/// Every bundled file name with its JSON content.
pub fn bundled() -> Result<Vec<(&'static str, String)>> {
    fn pretty<T: serde::Serialize>(value: &T) -> Result<String> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        Ok(s)
    }
    Ok(vec![
        ("train_dialogues.json", pretty(&train_dialogues())?),
        ("agent_a.json", pretty(&agent_a_corpus())?),
        ("agent_b.json", pretty(&agent_b_corpus())?),
        (
            "user_table.json",
            pretty(&crate::performance::UnitTable {
                units: user_units(),
            })?,
        ),
        (
            "depart_city_repair_pool.json",
            pretty(&depart_city_repair_pool())?,
        ),
        ("request_domain.json", pretty(&request_domain())?),
        ("circuit_domain.json", pretty(&circuit_domain())?),
        ("empty.json", pretty(&empty_corpus())?),
    ])
}
