// Fixed token inventory for the synthetic spatial-QA tasks.
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "sstk/errors.hpp"

namespace sstk {

class Vocab {
 public:
  // Specials, option letters A-D, digits, decimal point, task keywords.
  static const Vocab& standard();

  int id(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  int pad() const { return pad_; }
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int vis() const { return vis_; }  // vision placeholder, expanded upstream
  const std::vector<int>& options() const { return options_; }  // A..D

  std::string decode(const std::vector<int>& ids) const;

 private:
  Vocab();
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = 0, bos_ = 0, eos_ = 0, vis_ = 0;
  std::vector<int> options_;
};

}  // namespace sstk
