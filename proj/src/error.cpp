#include "tttgate/error.hpp"

namespace tttgate {

std::string NumericLocation::describe() const {
  std::string out;
  auto add = [&out](const char* name, const std::optional<std::size_t>& v) {
    if (!v) return;
    if (!out.empty()) out += ", ";
    out += name;
    out += ' ';
    out += std::to_string(*v);
  };
  add("sequence", sequence);
  add("chunk", chunk);
  add("token", token);
  add("head", head);
  return out;
}

namespace {
std::string compose(const std::string& what, const NumericLocation& where) {
  const std::string loc = where.describe();
  return loc.empty() ? what : what + " (at " + loc + ")";
}
}  // namespace

NumericError::NumericError(const std::string& what, NumericLocation where)
    : std::runtime_error(compose(what, where)), message_(what), where_(where) {}

NumericError NumericError::located(const NumericLocation& outer) const {
  NumericLocation merged = where_;
  if (!merged.sequence) merged.sequence = outer.sequence;
  if (!merged.chunk) merged.chunk = outer.chunk;
  if (!merged.token) merged.token = outer.token;
  if (!merged.head) merged.head = outer.head;
  return NumericError(message_, merged);
}

}  // namespace tttgate
