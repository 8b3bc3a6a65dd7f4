#include <algorithm>

#include "plaba/adapt.hpp"
#include "plaba/default_template.hpp"
#include "plaba/error.hpp"
#include "plaba/util.hpp"

namespace plaba::adapt {

using nlohmann::json;

namespace {

constexpr const char* kQuestionSlot = "{question}";
constexpr const char* kSentenceSlot = "{sentence}";

void replace_all(std::string& text, const std::string& from, const std::string& to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

void PromptTemplate::validate() const {
  if (kind == PromptKind::kGuideline) {
    if (guideline_text.empty()) throw ValidationError("guideline template " + id + ": empty guideline text");
    if (!example) throw ValidationError("guideline template " + id + ": missing example");
    if (example->first.empty() || example->second.empty()) {
      throw ValidationError("guideline template " + id + ": example needs a source and an adaptation");
    }
  } else {
    if (instruction_text.find(kQuestionSlot) == std::string::npos ||
        instruction_text.find(kSentenceSlot) == std::string::npos) {
      throw ValidationError("instruction template " + id +
                            ": text must contain {question} and {sentence} placeholders");
    }
  }
}

PromptTemplate default_instruction_template() {
  PromptTemplate t;
  t.id = "instruction-default-v1";
  t.kind = PromptKind::kInstruction;
  t.instruction_text = std::string(kInstructionPrefix) + kQuestionSlot + "\n" + kSentenceSlot;
  return t;
}

PromptTemplate default_guideline_template() {
  static const PromptTemplate kDefault = template_from_json(json::parse(kDefaultGuidelineTemplate));
  return kDefault;
}

PromptTemplate template_from_json(const json& doc) {
  PromptTemplate t;
  try {
    t.id = doc.value("id", "");
    std::string kind = doc.at("kind").get<std::string>();
    if (kind == "instruction") {
      t.kind = PromptKind::kInstruction;
      t.instruction_text = doc.at("instruction_text").get<std::string>();
    } else if (kind == "guideline") {
      t.kind = PromptKind::kGuideline;
      t.guideline_text = doc.at("guideline_text").get<std::string>();
      if (doc.contains("example") && !doc.at("example").is_null()) {
        const auto& ex = doc.at("example");
        t.example = std::make_pair(ex.at("source").get<std::string>(),
                                   ex.at("adaptation").get<std::string>());
      }
    } else {
      throw ValidationError("unknown template kind: " + kind);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed prompt template: ") + e.what());
  }
  t.validate();
  return t;
}

json template_to_json(const PromptTemplate& tmpl) {
  json out = {{"id", tmpl.id}};
  if (tmpl.kind == PromptKind::kInstruction) {
    out["kind"] = "instruction";
    out["instruction_text"] = tmpl.instruction_text;
  } else {
    out["kind"] = "guideline";
    out["guideline_text"] = tmpl.guideline_text;
    if (tmpl.example) {
      out["example"] = {{"source", tmpl.example->first}, {"adaptation", tmpl.example->second}};
    }
  }
  return out;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return template_from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string build_instruction_prompt(const corpus::ConsumerQuestion& question,
                                     const std::string& sentence, const PromptTemplate& tmpl) {
  if (tmpl.kind != PromptKind::kInstruction) {
    throw ValidationError("template " + tmpl.id + " is not an instruction template");
  }
  tmpl.validate();
  if (question.text.empty()) throw ValidationError("instruction prompt needs the question text");
  if (sentence.empty()) throw ValidationError("instruction prompt needs a non-empty sentence");
  // Substitute the sentence first so braces inside the question are left alone.
  std::string out = tmpl.instruction_text;
  std::size_t q = out.find(kQuestionSlot);
  std::string head = out.substr(0, q);
  std::string tail = out.substr(q + std::string(kQuestionSlot).size());
  replace_all(head, kSentenceSlot, sentence);
  replace_all(tail, kSentenceSlot, sentence);
  return head + question.text + tail;
}

std::string build_instruction_prompt(const corpus::ConsumerQuestion& question,
                                     const std::string& sentence) {
  static const PromptTemplate kDefault = default_instruction_template();
  return build_instruction_prompt(question, sentence, kDefault);
}

std::string build_guideline_prompt(const corpus::ConsumerQuestion& question,
                                   const std::string& sentence, const PromptTemplate& tmpl) {
  if (tmpl.kind != PromptKind::kGuideline) {
    throw ValidationError("template " + tmpl.id + " is not a guideline template");
  }
  tmpl.validate();
  if (sentence.empty()) throw ValidationError("guideline prompt needs a non-empty sentence");
  std::string out;
  out += "### Guidelines\n" + tmpl.guideline_text + "\n\n";
  out += "### Example\nSentence: " + tmpl.example->first + "\nAdaptation: " + tmpl.example->second +
         "\n\n";
  out += "### Question\n" + question.text + "\n\n";
  out += "### Sentence\n" + sentence + "\n";
  return out;
}

std::string render_prompt(const corpus::ConsumerQuestion& question, const std::string& sentence,
                          const PromptTemplate& tmpl) {
  return tmpl.kind == PromptKind::kGuideline ? build_guideline_prompt(question, sentence, tmpl)
                                             : build_instruction_prompt(question, sentence, tmpl);
}

std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

}  // namespace plaba::adapt
