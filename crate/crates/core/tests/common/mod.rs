pub mod reference_bt;
