"""
Cleaning and segmenting microblog posts
=======================================

Posts carry repost tails, mentions, links and emoticon codes that the author
did not write. This walks one user's messages through cleaning, dictionary
segmentation and aggregation into a single per-user document.
"""

from psyling.corpus import RawMessage, SegmenterConfig, aggregate_users, clean_message, segment

# cleaning keeps only the author's own words
raw = "回复@小明: 今天心情很好 http://t.cn/abc [哈哈] //@someone: 转发的内容"
print(clean_message(raw))

# forward maximum matching prefers the longest dictionary word at each position
seg = SegmenterConfig("max_match", dictionary=frozenset({"今天", "心情", "很好", "天心"}),
                      stopwords=frozenset({"今天"}))
print(segment("今天心情很好", seg))

# all posts by a user become one document; single characters and stopwords drop out
messages = [
    RawMessage("u1", raw),
    RawMessage("u1", "心情 不错 #周末# 出去"),
    RawMessage("u2", "别人写的", is_retweet=True),
]
corpus = aggregate_users(messages, seg, scores={"u1": 31.0, "u2": 18.5})
for doc in corpus:
    print(doc.user_id, doc.tokens, doc.raw_byte_length, doc.score)
