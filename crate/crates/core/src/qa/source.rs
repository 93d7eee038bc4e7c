//! Where answers come from: the simulated annotator or a live one.

use crate::error::Result;
use crate::world::{Answer, Oracle, Question};

pub trait AnswerSource {
    fn answer(&mut self, q: &Question) -> Result<Answer>;
}

impl AnswerSource for Oracle {
    fn answer(&mut self, q: &Question) -> Result<Answer> {
        Oracle::answer(self, q)
    }
}

impl<F> AnswerSource for F
where
    F: FnMut(&Question) -> Result<Answer>,
{
    fn answer(&mut self, q: &Question) -> Result<Answer> {
        self(q)
    }
}
