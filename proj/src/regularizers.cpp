// Copyright 2026 The PUMC Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <pumc/regularizers.hpp>

#include <charconv>
#include <sstream>

namespace pumc {

namespace {

double parse_mu(std::string_view text, std::string_view whole) {
  double mu = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), mu);
  if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("bad regularizer parameter in '" + std::string(whole) + "'");
  return mu;
}

}  // namespace

RegularizerSpec parse_regularizer(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::string_view arg =
      colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (name == "nuclear") {
    if (!arg.empty()) throw std::invalid_argument("nuclear takes no parameter");
    return RegularizerSpec::nuclear();
  }
  if (colon == std::string_view::npos)
    throw std::invalid_argument("regularizer '" + std::string(text) + "' needs a parameter");
  const double mu = parse_mu(arg, text);
  if (name == "tnn") return RegularizerSpec::checked({RegularizerKind::TNN, mu});
  if (name == "capped") return RegularizerSpec::capped_l1(mu);
  if (name == "lsp") return RegularizerSpec::lsp(mu);
  throw std::invalid_argument("unknown regularizer '" + std::string(text) + "'");
}

std::string to_string(const RegularizerSpec& spec) {
  std::ostringstream out;
  switch (spec.kind) {
    case RegularizerKind::TNN:
      out << "tnn:" << spec.leading();
      break;
    case RegularizerKind::CappedL1:
      out << "capped:" << spec.mu;
      break;
    case RegularizerKind::LSP:
      out << "lsp:" << spec.mu;
      break;
    case RegularizerKind::Nuclear:
      out << "nuclear";
      break;
  }
  return out.str();
}

}  // namespace pumc
