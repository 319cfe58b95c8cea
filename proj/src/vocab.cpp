#include "sstk/vocab.hpp"

namespace sstk {

Vocab::Vocab() {
  tokens_ = {
      "<pad>", "<bos>", "<eos>", "<vis>",
      "A", "B", "C", "D",
      "0", "1", "2", "3", "4", "5", "6", "7", "8", "9", ".",
      "which", "point", "is", "closer", "to", "than", "object", "distance",
      "depth", "view", "in", "compare", "?",
      "class0", "class1", "class2", "class3", "class4", "class5",
  };
  for (size_t i = 0; i < tokens_.size(); ++i) ids_[tokens_[i]] = static_cast<int>(i);
  pad_ = ids_.at("<pad>");
  bos_ = ids_.at("<bos>");
  eos_ = ids_.at("<eos>");
  vis_ = ids_.at("<vis>");
  options_ = {ids_.at("A"), ids_.at("B"), ids_.at("C"), ids_.at("D")};
}

const Vocab& Vocab::standard() {
  static const Vocab v;
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw ArgumentError("unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw ArgumentError("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

std::string Vocab::decode(const std::vector<int>& ids) const {
  std::string out;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += token(ids[i]);
  }
  return out;
}

}  // namespace sstk
