//! Holds the `acceptance` test target, which prints one PASS or FAIL line
//! per acceptance check and exits non-zero if any fail.
