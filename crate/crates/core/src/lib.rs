// Negated float comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod modebasis;
pub mod oracle;
pub mod petal;
pub mod roots;
pub mod scatter;
pub mod specfun;
pub mod validate;
