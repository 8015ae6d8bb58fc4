// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "ee2d/textseg.hpp"

using ee2d::textseg::split_sentences;
using Sentences = std::vector<std::string>;

TEST(SplitSentences, ReviewWithDoctorAbbreviation) {
  EXPECT_EQ(split_sentences("Excellent product! It is great. I recommend Dr. Smith.").sentences,
            (Sentences{"Excellent product!", "It is great.", "I recommend Dr. Smith."}));
}

TEST(SplitSentences, NoInternalDelimiter) {
  EXPECT_EQ(split_sentences("One sentence with no terminal whitespace.").sentences,
            (Sentences{"One sentence with no terminal whitespace."}));
}

TEST(SplitSentences, EllipsisAndRepeatedBang) {
  EXPECT_EQ(split_sentences("Wait... what? Yes!! Ok.").sentences,
            (Sentences{"Wait... what?", "Yes!!", "Ok."}));
}

TEST(SplitSentences, TrailingTextBecomesSentence) {
  EXPECT_EQ(split_sentences("Nice. no period here").sentences,
            (Sentences{"Nice.", "no period here"}));
}

TEST(SplitSentences, EmptyInputThrows) {
  EXPECT_THROW(split_sentences(""), ee2d::EmptyInput);
  EXPECT_THROW(split_sentences(" \n\t "), ee2d::EmptyInput);
}

TEST(SplitSentences, SourceLengthCountsCodePoints) {
  EXPECT_EQ(split_sentences("Über.").source_length, 5u);
}

TEST(SplitSentences, NonAsciiTerminatorDoesNotSplit) {
  EXPECT_EQ(split_sentences("Gut。 Sehr gut。").size(), 1u);
}

TEST(SplitSentences, GuardHoldsForEveryDefaultAbbreviation) {
  for (const auto& a : ee2d::textseg::default_abbreviations()) {
    const auto r = split_sentences("Before " + a + " Word. After.");
    ASSERT_EQ(r.size(), 2u) << a;
    EXPECT_EQ(r.sentences[0], "Before " + a + " Word.") << a;
  }
}

TEST(SplitSentences, IdempotentOnEachSentence) {
  const char* texts[] = {"Wait... what? Yes!! Ok.", "A b. C d! E f? G",
                         "Mr. X met Dr. Y. Then left.", "Really?! Sure.  Fine"};
  for (const char* t : texts)
    for (const auto& s : split_sentences(t).sentences)
      EXPECT_EQ(split_sentences(s).sentences, Sentences{s});
}

TEST(SplitSentences, CoversEveryNonSpaceCharacterInOrder) {
  const std::string text = "  One. Two!!  Three?\nFour... five. six ";
  std::string joined, original;
  for (const auto& s : split_sentences(text).sentences) joined += s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) original += c;
  joined.erase(std::remove_if(joined.begin(), joined.end(),
                              [](char c) { return std::isspace(static_cast<unsigned char>(c)); }),
               joined.end());
  EXPECT_EQ(joined, original);
}

TEST(SplitSentences, CustomAbbreviationListReplacesDefaults) {
  const std::vector<std::string> custom = {"approx."};
  EXPECT_EQ(split_sentences("It is approx. ten. Dr. Who.", custom).sentences,
            (Sentences{"It is approx. ten.", "Dr.", "Who."}));
}

TEST(LoadAbbreviations, SkipsCommentsAndBlankLines) {
  const auto path = std::filesystem::temp_directory_path() / "ee2d_abbrev_test.txt";
  {
    std::ofstream out(path);
    out << "# custom list\nProf.\n\n  Gen.  \n";
  }
  const auto list = ee2d::textseg::load_abbreviations(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(list, (std::vector<std::string>{"Prof.", "Gen."}));
}

TEST(LoadAbbreviations, MissingFileIsIoError) {
  EXPECT_THROW(ee2d::textseg::load_abbreviations("/nonexistent/abbrev.txt"), ee2d::IoError);
}
