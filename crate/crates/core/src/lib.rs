//! Two-player Colonel Blotto games on directed graphs.
//!
//! Each player holds per-type robot fractions on the nodes of a graph and
//! moves them one step along edges. Player 1's payoff counts the nodes it
//! wins minus those it loses, with a linear ramp of width `C` around ties.
//! Three payoff models are supported: one resource type, several linearly
//! convertible types (reduced to one), and three cyclically dominating types.
//!
//! Equilibria are computed with the double oracle loop in [`doa`]: subgames
//! over finite strategy lists are solved by LP ([`matrix_game`]) and grown
//! with exact best responses from a MILP ([`best_response`]).

pub mod baselines;
pub mod best_response;
pub mod config;
pub mod doa;
pub mod error;
pub mod game;
pub mod graph;
pub mod matrix_game;
pub mod payoff;

pub use error::{BlottoError, FieldError, Result};
pub use game::{Game, Player, PlayerSpace};
pub use matrix_game::MixedStrategy;
pub use payoff::{Strategy, UtilityModel};
