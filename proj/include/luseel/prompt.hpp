#pragma once

#include <string>
#include <vector>

namespace luseel {

// Free-form text query: a keyword, a keyword set or a caption.
class TextPrompt {
 public:
  // Throws InputError when the text is empty after trimming whitespace.
  explicit TextPrompt(std::string text);

  const std::string& text() const { return text_; }
  std::vector<std::string> tokens() const;

  friend bool operator==(const TextPrompt&, const TextPrompt&) = default;

 private:
  std::string text_;
};

}  // namespace luseel
