pub mod canonical;
pub mod sim_kernel;
pub mod protocol;
pub mod behavior_tree;
pub mod iot_sensors;
pub mod patient_and_expert_models;
pub mod edge_robot;
pub mod cloud_services;
pub mod gateway;
