#include "molprop/serialize.hpp"

namespace molprop {

void to_json(nlohmann::json& j, const DatasetSchema& s) {
  j = nlohmann::json{{"atom_vocab_sizes", s.atom_vocab}, {"bond_vocab_sizes", s.bond_vocab}};
}

void from_json(const nlohmann::json& j, DatasetSchema& s) {
  j.at("atom_vocab_sizes").get_to(s.atom_vocab);
  j.at("bond_vocab_sizes").get_to(s.bond_vocab);
}

void to_json(nlohmann::json& j, const GraphormerConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},
                     {"d_model", c.d_model},
                     {"n_heads", c.n_heads},
                     {"head_dim", c.head_dim},
                     {"ffn_dim", c.ffn_dim},
                     {"n_rbf", c.n_rbf},
                     {"rbf_min", c.rbf_min},
                     {"rbf_max", c.rbf_max},
                     {"degree_buckets", c.degree_buckets},
                     {"hop_buckets", c.hop_buckets},
                     {"ffn_dropout", c.ffn_dropout},
                     {"attn_dropout", c.attn_dropout},
                     {"embed_dropout", c.embed_dropout},
                     {"ln_eps", c.ln_eps},
                     {"spatial_mode", to_string(c.spatial)}};
}

void from_json(const nlohmann::json& j, GraphormerConfig& c) {
  j.at("n_layers").get_to(c.n_layers);
  j.at("d_model").get_to(c.d_model);
  j.at("n_heads").get_to(c.n_heads);
  j.at("head_dim").get_to(c.head_dim);
  j.at("ffn_dim").get_to(c.ffn_dim);
  j.at("n_rbf").get_to(c.n_rbf);
  j.at("rbf_min").get_to(c.rbf_min);
  j.at("rbf_max").get_to(c.rbf_max);
  j.at("degree_buckets").get_to(c.degree_buckets);
  j.at("hop_buckets").get_to(c.hop_buckets);
  j.at("ffn_dropout").get_to(c.ffn_dropout);
  j.at("attn_dropout").get_to(c.attn_dropout);
  j.at("embed_dropout").get_to(c.embed_dropout);
  j.at("ln_eps").get_to(c.ln_eps);
  c.spatial = spatial_mode_from_string(j.at("spatial_mode").get<std::string>());
}

void to_json(nlohmann::json& j, const ExpCConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},
                     {"d_model", c.d_model},
                     {"d_expand", c.d_expand},
                     {"dropout", c.dropout}};
}

void from_json(const nlohmann::json& j, ExpCConfig& c) {
  j.at("n_layers").get_to(c.n_layers);
  j.at("d_model").get_to(c.d_model);
  j.at("d_expand").get_to(c.d_expand);
  j.at("dropout").get_to(c.dropout);
}

void to_json(nlohmann::json& j, const GraphormerTrainConfig& c) {
  j = nlohmann::json{{"max_steps", c.max_steps},
                     {"peak_lr", c.peak_lr},
                     {"batch_size", c.batch_size},
                     {"warmup_steps", c.warmup_steps},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"grad_clip_norm", c.grad_clip_norm},
                     {"weight_decay", c.weight_decay},
                     {"eval_interval", c.eval_interval}};
}

void from_json(const nlohmann::json& j, GraphormerTrainConfig& c) {
  j.at("max_steps").get_to(c.max_steps);
  j.at("peak_lr").get_to(c.peak_lr);
  j.at("batch_size").get_to(c.batch_size);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("grad_clip_norm").get_to(c.grad_clip_norm);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("eval_interval").get_to(c.eval_interval);
}

void to_json(nlohmann::json& j, const ExpCTrainConfig& c) {
  j = nlohmann::json{{"max_epochs", c.max_epochs},
                     {"batch_size", c.batch_size},
                     {"peak_lr", c.peak_lr},
                     {"adam_beta1", c.adam_beta1},
                     {"adam_beta2", c.adam_beta2},
                     {"adam_eps", c.adam_eps},
                     {"lr_decay_rate", c.lr_decay_rate},
                     {"lr_decay_step", c.lr_decay_step},
                     {"grad_clip_norm", c.grad_clip_norm},
                     {"weight_decay", c.weight_decay},
                     {"eval_interval", c.eval_interval}};
}

void from_json(const nlohmann::json& j, ExpCTrainConfig& c) {
  j.at("max_epochs").get_to(c.max_epochs);
  j.at("batch_size").get_to(c.batch_size);
  j.at("peak_lr").get_to(c.peak_lr);
  j.at("adam_beta1").get_to(c.adam_beta1);
  j.at("adam_beta2").get_to(c.adam_beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("lr_decay_rate").get_to(c.lr_decay_rate);
  j.at("lr_decay_step").get_to(c.lr_decay_step);
  j.at("grad_clip_norm").get_to(c.grad_clip_norm);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("eval_interval").get_to(c.eval_interval);
}

std::string checkpoint_meta_graphormer(const GraphormerConfig& cfg, const DatasetSchema& schema,
                                       std::uint64_t seed) {
  nlohmann::json j;
  j["model"] = "graphormer";
  j["config"] = cfg;
  j["schema"] = schema;
  j["seed"] = seed;
  return j.dump();
}

std::string checkpoint_meta_expc(const ExpCConfig& cfg, const DatasetSchema& schema,
                                 std::uint64_t seed) {
  nlohmann::json j;
  j["model"] = "expc";
  j["config"] = cfg;
  j["schema"] = schema;
  j["seed"] = seed;
  return j.dump();
}

}  // namespace molprop
