//! The conversational ReAct loop: route, query, observe, respond, and keep a
//! dialog state of per-column constraints across turns.

mod router;
mod session;

use serde::{Deserialize, Serialize};

pub use router::{route_table, tokens, RouteTarget, RoutingDecision, DEFAULT_SWITCH_MARGIN};
pub use session::{replay, SessionStore};

use crate::error::{Error, Result};
use crate::model::{Constraint, DialogState, Operator, Value};
use crate::pipeline::Engine;
use crate::tablegen::ResultSet;
use crate::text2sql::{GeneratedQuery, ValidationStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Tool calls allowed per user utterance.
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Rows copied into each observation.
    #[serde(default = "default_sample_rows")]
    pub sample_rows: usize,
    #[serde(default = "default_margin")]
    pub switch_margin: f64,
}

fn default_max_iterations() -> usize {
    3
}

fn default_sample_rows() -> usize {
    3
}

fn default_margin() -> f64 {
    DEFAULT_SWITCH_MARGIN
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            max_iterations: default_max_iterations(),
            sample_rows: default_sample_rows(),
            switch_margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    QueryTable,
    Respond,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub tool: Tool,
    pub arguments: serde_json::Map<String, serde_json::Value>,
}

/// Summary of one query_table call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub table_id: String,
    pub sql: String,
    pub status: ValidationStatus,
    pub row_count: usize,
    pub columns: Vec<String>,
    pub sample_rows: Vec<Vec<Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One Thought/Action/Observation cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactStep {
    pub thought: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTurn {
    pub turn_index: usize,
    pub utterance: String,
    pub thought: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Observation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    pub state_after: DialogState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<GeneratedQuery>,
    pub steps: Vec<ReactStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub routing: Vec<RoutingDecision>,
    pub dialog_state: DialogState,
    pub turns: Vec<AgentTurn>,
}

impl Session {
    pub fn new(session_id: impl Into<String>) -> Self {
        Session {
            session_id: session_id.into(),
            routing: Vec::new(),
            dialog_state: DialogState::default(),
            turns: Vec::new(),
        }
    }

    /// Applies a finished turn to the session.
    pub fn push(&mut self, turn: AgentTurn) {
        if let Some(r) = &turn.routing {
            self.routing.push(r.clone());
        }
        self.dialog_state = turn.state_after.clone();
        self.turns.push(turn);
    }

    pub fn next_turn_index(&self) -> usize {
        self.turns.last().map_or(1, |t| t.turn_index + 1)
    }

    /// Folds [`update_dialog_state`] over every executed query.
    pub fn replayed_state(&self) -> DialogState {
        self.turns.iter().fold(DialogState::default(), |state, t| match &t.query {
            Some(q) if q.report.is_executable() => update_dialog_state(&state, q, t.turn_index),
            _ => state,
        })
    }
}

fn table_of(view: &str) -> &str {
    view.strip_suffix("__joined").unwrap_or(view)
}

/// Promotes the top-level AND atoms of `query` into the state. A query on a
/// different table starts a fresh state; `IS ANY` removes a constraint; a
/// constraint repeated unchanged keeps the turn it came from.
pub fn update_dialog_state(state: &DialogState, query: &GeneratedQuery, turn_index: usize) -> DialogState {
    let table = table_of(&query.ast.source);
    let mut next = if state.active_table == table { state.clone() } else { DialogState::new(table) };
    let Some(predicate) = &query.ast.predicate else {
        return next;
    };
    for atom in predicate.top_level_atoms() {
        if atom.op == Operator::Any {
            next.constraints.remove(&atom.column);
            continue;
        }
        let origin = match next.constraints.get(&atom.column) {
            Some(c) if c.op == atom.op && c.operand == atom.operand => c.turn_index,
            _ => turn_index,
        };
        next.constraints.insert(
            atom.column.clone(),
            Constraint { op: atom.op, operand: atom.operand.clone(), turn_index: origin },
        );
    }
    next
}

fn args(pairs: &[(&str, serde_json::Value)]) -> serde_json::Map<String, serde_json::Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn observe(table_id: &str, query: &GeneratedQuery, rows: Option<&ResultSet>, sample: usize) -> Observation {
    Observation {
        table_id: table_id.to_string(),
        sql: query.raw_sql.clone(),
        status: query.report.status,
        row_count: rows.map_or(0, |r| r.rows.len()),
        columns: rows.map(|r| r.columns.clone()).unwrap_or_default(),
        sample_rows: rows.map(|r| r.rows.iter().take(sample).cloned().collect()).unwrap_or_default(),
        error: (!query.report.is_executable())
            .then(|| query.report.issues.iter().map(|i| i.detail.clone()).collect::<Vec<_>>().join("; ")),
    }
}

fn describe_state(state: &DialogState) -> String {
    if state.is_empty() {
        return "no constraints".into();
    }
    state
        .constraints
        .iter()
        .map(|(col, c)| format!("{col} {} {}", c.op, c.operand))
        .collect::<Vec<_>>()
        .join(", ")
}

fn answer_text(table_id: &str, rows: &ResultSet, pk: &str, state: &DialogState) -> String {
    let n = rows.rows.len();
    if n == 0 {
        return format!(
            "No items in {table_id} match ({}). Try relaxing a constraint, for example \"any color\".",
            describe_state(state)
        );
    }
    let keys = rows.column_values(pk);
    let shown: Vec<&str> = keys.iter().take(5).map(String::as_str).collect();
    let more = if n > shown.len() { format!(" and {} more", n - shown.len()) } else { String::new() };
    let noun = if n == 1 { "match" } else { "matches" };
    if shown.is_empty() {
        format!("Found {n} {noun} in {table_id}.")
    } else {
        format!("Found {n} {noun} in {table_id}: {}{more}.", shown.join(", "))
    }
}

/// Routing vocabulary of every table the engine serves.
pub fn route_targets(engine: &Engine) -> Vec<RouteTarget> {
    engine
        .tables()
        .iter()
        .map(|t| RouteTarget::new(&t.context.domain_id, &t.schema, &t.catalog))
        .collect()
}

/// Handles one user utterance: route (sticky), compile with the current
/// dialog state, run the query, and answer. Routing failures and rejected
/// queries produce a clarification and leave the state unchanged.
pub fn step(session: &Session, utterance: &str, engine: &Engine, config: &AgentConfig) -> Result<AgentTurn> {
    let utterance = utterance.trim();
    if utterance.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    let turn_index = session.next_turn_index();
    let state = &session.dialog_state;
    let mut steps: Vec<ReactStep> = Vec::new();

    let targets = route_targets(engine);
    let current = (!state.active_table.is_empty()).then_some(state.active_table.as_str());
    let routing = match route_table(utterance, &targets, current, config.switch_margin) {
        Ok(r) => r,
        Err(Error::Routing(reason)) => {
            let response = format!("I'm not sure which catalog you mean: {reason}. Which one should I search?");
            let thought = format!("Routing failed ({reason}); asking the user to pick a table.");
            let action = Action {
                tool: Tool::Respond,
                arguments: args(&[("text", response.clone().into())]),
            };
            steps.push(ReactStep { thought: thought.clone(), action: action.clone(), observation: None });
            return Ok(AgentTurn {
                turn_index,
                utterance: utterance.to_string(),
                thought,
                action,
                observation: None,
                response: Some(response),
                state_after: state.clone(),
                routing: None,
                query: None,
                steps,
            });
        }
        Err(e) => return Err(e),
    };
    let table_id = routing.table_id.clone();
    let table = engine.table(&table_id)?;
    let prompt_state = if state.active_table == table_id { state.clone() } else { DialogState::new(&table_id) };

    let scores = routing
        .scores
        .iter()
        .map(|(t, s)| format!("{t}={s}"))
        .collect::<Vec<_>>()
        .join(", ");
    let how = if routing.switched {
        "switching tables"
    } else if current.is_some() {
        "staying on the active table"
    } else {
        "best overlap"
    };
    let thought = format!(
        "Route to {table_id} ({how}; scores {scores}). Compile the question with {} carried constraint(s) and query the joined view.",
        prompt_state.constraints.len()
    );

    // The planner issues one query_table call per utterance, then responds.
    if config.max_iterations < 1 {
        return Err(Error::AgentBudget { limit: config.max_iterations, trace: steps });
    }
    let action = Action {
        tool: Tool::QueryTable,
        arguments: args(&[("table_id", table_id.clone().into()), ("question", utterance.into())]),
    };
    let answer = match engine.ask(&table_id, utterance, &prompt_state) {
        Ok(a) => Ok(a),
        Err(Error::SemanticParse { completion, reason }) => Err((completion, reason)),
        Err(e) => return Err(e),
    };

    let (observation, query, response, state_after) = match answer {
        Ok(answer) => {
            let observation = observe(&table_id, &answer.query, answer.rows.as_ref(), config.sample_rows);
            match (&answer.rows, answer.query.report.status) {
                (Some(rows), _) => {
                    let next = update_dialog_state(&prompt_state, &answer.query, turn_index);
                    let text = answer_text(&table_id, rows, table.schema.primary_key.as_str(), &next);
                    (observation, Some(answer.query), text, next)
                }
                (None, _) => {
                    let detail = observation.error.clone().unwrap_or_default();
                    let text = format!("I couldn't match part of that to the {table_id} catalog ({detail}). Could you rephrase?");
                    (observation, Some(answer.query), text, state.clone())
                }
            }
        }
        Err((completion, reason)) => {
            let observation = Observation {
                table_id: table_id.clone(),
                sql: String::new(),
                status: ValidationStatus::Rejected,
                row_count: 0,
                columns: Vec::new(),
                sample_rows: Vec::new(),
                error: Some(format!("{reason}; model answered {completion:?}")),
            };
            let text = format!("I couldn't turn that into a query for {table_id}. Could you rephrase?");
            (observation, None, text, state.clone())
        }
    };
    steps.push(ReactStep {
        thought: thought.clone(),
        action: action.clone(),
        observation: Some(observation.clone()),
    });
    let respond_thought = format!(
        "Observed {} row(s) with status {}; answer the user.",
        observation.row_count, observation.status
    );
    steps.push(ReactStep {
        thought: respond_thought,
        action: Action { tool: Tool::Respond, arguments: args(&[("text", response.clone().into())]) },
        observation: None,
    });

    Ok(AgentTurn {
        turn_index,
        utterance: utterance.to_string(),
        thought,
        action,
        observation: Some(observation),
        response: Some(response),
        state_after,
        routing: Some(routing),
        query,
        steps,
    })
}
