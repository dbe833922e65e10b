#![allow(dead_code, clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
