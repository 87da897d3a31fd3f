//
// Copyright 2026 The Attackscope Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef ATTACKSCOPE_ERROR_H_
#define ATTACKSCOPE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace attackscope {

enum class ErrorCode {
  kDegenerateInput,
  kNoEmbeddableContent,
  kContractViolation,
  kParse,
  kDimensionMismatch,
  kDuplicateId,
  kDivergence,
  kBudgetExceeded,
  kUndefinedRate,
  kIncompleteGrid,
  kUnknownSetting,
  kDegenerateTraining,
  kEmptyInput,
  kIdMismatch,
  kUndefinedRecall,
  kUndefinedCorrelation,
  kUnknownMethod,
  kConfig,
  kMissingArtifact,
  kInvariantAudit,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// Every failure in the library is reported as an Error carrying a code, so
// callers (notably the CLI) can map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace attackscope

#endif  // ATTACKSCOPE_ERROR_H_
